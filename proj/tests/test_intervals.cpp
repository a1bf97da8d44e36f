#include "zimed/error.hpp"
#include "zimed/intervals.hpp"
#include "zimed/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace zimed;

namespace {

std::vector<double> normal_samples(int k, std::uint64_t seed, double mu = 0.0,
                                   double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> z(mu, sd);
  std::vector<double> v(k);
  for (auto &x : v)
    x = z(rng);
  return v;
}

} // namespace

TEST_CASE("hdi holds ceil((1 - alpha) K) samples") {
  for (int k : {500, 999, 1000, 2001}) {
    const auto v = normal_samples(k, k);
    const auto [lo, hi] = hdi(v, 0.05);
    const auto inside = std::count_if(v.begin(), v.end(), [&](double x) {
      return lo <= x && x <= hi;
    });
    CHECK(inside == static_cast<long>(std::ceil(0.95 * k - 1e-9)));
  }
}

TEST_CASE("hdi is never wider than the equal-tailed interval") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<double> v = normal_samples(1000, seed);
    // Skew half the cases.
    if (seed % 2 == 0)
      for (auto &x : v)
        x = std::exp(x);
    const auto [hl, hh] = hdi(v, 0.05);
    const auto [pl, ph] = percentile_interval(v, 0.05);
    CHECK(hh - hl <= ph - pl + 1e-12);
  }
}

TEST_CASE("ties go to the leftmost window") {
  std::vector<double> v(100);
  for (int k = 0; k < 100; ++k)
    v[k] = k;
  const auto [lo, hi] = hdi(v, 0.1);
  CHECK(lo == 0.0);
  CHECK(hi == 89.0);
}

TEST_CASE("normal endpoints approach the z quantiles") {
  const auto v = normal_samples(10000, 42);
  const auto [lo, hi] = hdi(v, 0.05);
  CHECK(std::abs(lo + 1.96) < 0.08);
  CHECK(std::abs(hi - 1.96) < 0.08);
}

TEST_CASE("percentile interval order statistics") {
  std::vector<double> v(1000);
  for (int k = 0; k < 1000; ++k)
    v[k] = 999 - k;
  const auto [lo, hi] = percentile_interval(v, 0.05);
  CHECK(lo == 25.0);
  CHECK(hi == 974.0);
}

TEST_CASE("mode of a normal sample") {
  const auto v = normal_samples(5000, 3, 2.0, 0.5);
  CHECK(std::abs(fiducial_mode(v) - 2.0) < 0.1);
  // Bimodal with a taller left peak.
  auto a = normal_samples(3000, 4, -3.0, 0.5);
  const auto b = normal_samples(1000, 5, 3.0, 0.5);
  a.insert(a.end(), b.begin(), b.end());
  CHECK(std::abs(fiducial_mode(a) + 3.0) < 0.2);
}

TEST_CASE("generalized p-value") {
  std::vector<double> v(1000);
  for (int k = 0; k < 1000; ++k)
    v[k] = k + 1.0;
  CHECK(generalized_p_value(v, 0.0) == doctest::Approx(2.0 / 1000));
  CHECK(generalized_p_value(v, 500.5) == doctest::Approx(1.0));
  CHECK(generalized_p_value(v, 100.5) == doctest::Approx(0.2));
  const auto n = normal_samples(20000, 6);
  CHECK(generalized_p_value(n, 1.96) == doctest::Approx(0.05).epsilon(0.15));
}

TEST_CASE("summary needs enough draws") {
  CHECK_THROWS_AS(fiducial_summary(normal_samples(499, 7), 0.05), UsageError);
  const IntervalSummary s = fiducial_summary(normal_samples(2000, 8, 1.0), 0.05);
  CHECK(s.lower < s.estimate);
  CHECK(s.estimate < s.upper);
  CHECK(s.width == doctest::Approx(s.upper - s.lower));
  CHECK(s.method == IntervalMethod::FiducialHDI);
  CHECK(s.gen_p_value.has_value());
  CHECK(s.covers(1.0));
  CHECK_FALSE(s.excludes_zero());
}
