#ifndef ZIMED_TESTS_SUPPORT_HPP
#define ZIMED_TESTS_SUPPORT_HPP

#include "zimed/simulation.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace testing {

// Independent zero-inflated negative binomial mass, straight from lgamma.
inline double zinb_pmf(int m, double lambda, double pi, double phi) {
  const double lnb = std::lgamma(m + phi) - std::lgamma(phi) -
                     std::lgamma(m + 1.0) + phi * std::log(phi / (phi + lambda)) +
                     m * std::log(lambda / (phi + lambda));
  const double nb = std::exp(lnb);
  return m == 0 ? pi + (1.0 - pi) * nb : (1.0 - pi) * nb;
}

inline double zip_pmf(int m, double lambda, double pi) {
  const double po =
      std::exp(-lambda + m * std::log(lambda) - std::lgamma(m + 1.0));
  return m == 0 ? pi + (1.0 - pi) * po : (1.0 - pi) * po;
}

inline double normal_pdf(double x, double sd) {
  return std::exp(-0.5 * x * x / (sd * sd)) / (sd * std::sqrt(2.0 * M_PI));
}

// Scenario defaults with a smaller sample; enough signal for unit tests.
inline zimed::Dataset small_dataset(int n, int p, std::uint64_t seed,
                                    double beta0 = 0.0) {
  zimed::ScenarioConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.beta0 = {beta0};
  return zimed::generate_dataset(cfg, seed);
}

inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("zimed_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace testing

#endif
