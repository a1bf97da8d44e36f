#ifndef ZIMED_INTERVALS_HPP
#define ZIMED_INTERVALS_HPP

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace zimed {

enum class IntervalMethod { FiducialHDI, Delta, NPB };

std::string to_string(IntervalMethod m);

struct IntervalSummary {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;
  double alpha = 0.05;
  IntervalMethod method = IntervalMethod::FiducialHDI;
  std::optional<double> gen_p_value;

  bool covers(double value) const { return lower <= value && value <= upper; }
  bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

inline constexpr int min_interval_samples = 500;

// Shortest window holding ceil((1 - alpha) K) sorted samples; the leftmost
// window wins ties.
std::pair<double, double> hdi(std::vector<double> samples, double alpha);

// Equal-tailed percentile interval from order statistics:
// lower = x_(floor(K alpha/2)), upper = x_(ceil(K (1 - alpha/2)) - 1), 0-based.
std::pair<double, double> percentile_interval(std::vector<double> samples,
                                              double alpha);

// Argmax of a Gaussian KDE (Silverman bandwidth) on a 512-point grid over
// [min, max]; the smaller grid value wins ties.
double fiducial_mode(const std::vector<double> &samples);

// Two-sided 2 min(F(kappa), 1 - F(kappa)) with F the empirical CDF, clamped to
// [2/K, 1].
double generalized_p_value(const std::vector<double> &samples, double kappa);

// HDI, mode and p-value against 0 in one summary. Throws UsageError when
// fewer than min_interval_samples samples are given (unless check is false).
IntervalSummary fiducial_summary(const std::vector<double> &samples,
                                 double alpha, bool check = true);

} // namespace zimed

#endif
