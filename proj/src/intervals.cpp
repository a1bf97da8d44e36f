#include "zimed/intervals.hpp"

#include "zimed/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace zimed {

std::string to_string(IntervalMethod m) {
  switch (m) {
  case IntervalMethod::FiducialHDI:
    return "fiducial";
  case IntervalMethod::Delta:
    return "delta";
  case IntervalMethod::NPB:
    return "npb";
  }
  return "unknown";
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw UsageError("BadAlpha", "alpha must lie in (0, 1)");
}

void check_nonempty(const std::vector<double> &s) {
  if (s.empty())
    throw UsageError("NoSamples", "interval requested from zero samples");
}

} // namespace

std::pair<double, double> hdi(std::vector<double> samples, double alpha) {
  check_alpha(alpha);
  check_nonempty(samples);
  std::sort(samples.begin(), samples.end());
  const std::size_t k = samples.size();
  const auto m = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(k) - 1e-9));
  const std::size_t span = std::clamp<std::size_t>(m, 1, k);
  std::size_t best = 0;
  double best_width = INFINITY;
  for (std::size_t i = 0; i + span <= k; ++i) {
    const double w = samples[i + span - 1] - samples[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {samples[best], samples[best + span - 1]};
}

std::pair<double, double> percentile_interval(std::vector<double> samples,
                                              double alpha) {
  check_alpha(alpha);
  check_nonempty(samples);
  std::sort(samples.begin(), samples.end());
  const double k = static_cast<double>(samples.size());
  auto lo = static_cast<std::ptrdiff_t>(std::floor(k * alpha / 2.0 + 1e-9));
  auto hi =
      static_cast<std::ptrdiff_t>(std::ceil(k * (1.0 - alpha / 2.0) - 1e-9)) - 1;
  const auto last = static_cast<std::ptrdiff_t>(samples.size()) - 1;
  lo = std::clamp<std::ptrdiff_t>(lo, 0, last);
  hi = std::clamp<std::ptrdiff_t>(hi, lo, last);
  return {samples[lo], samples[hi]};
}

double fiducial_mode(const std::vector<double> &samples) {
  check_nonempty(samples);
  const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn_it;
  const double hi = *mx_it;
  if (hi == lo)
    return lo;
  const double k = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : samples)
    ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / std::max(k - 1.0, 1.0));
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  auto quant = [&](double q) {
    const double pos = q * (k - 1.0);
    const auto a = static_cast<std::size_t>(std::floor(pos));
    const auto b = std::min(a + 1, sorted.size() - 1);
    return sorted[a] + (pos - a) * (sorted[b] - sorted[a]);
  };
  const double iqr = quant(0.75) - quant(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    spread = sd > 0.0 ? sd : (hi - lo);
  const double h = 0.9 * spread * std::pow(k, -0.2);

  // Kernel sums over the sorted samples, truncated at 8 bandwidths.
  constexpr int grid = 512;
  double best_x = lo;
  double best_d = -1.0;
  for (int g = 0; g < grid; ++g) {
    const double x = lo + (hi - lo) * g / (grid - 1);
    const auto first =
        std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * h);
    const auto last = std::upper_bound(first, sorted.end(), x + 8.0 * h);
    double d = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / h;
      d += std::exp(-0.5 * z * z);
    }
    if (d > best_d) {
      best_d = d;
      best_x = x;
    }
  }
  return best_x;
}

double generalized_p_value(const std::vector<double> &samples, double kappa) {
  check_nonempty(samples);
  const double k = static_cast<double>(samples.size());
  // Mid-rank ECDF, so kappa at the sample median gives exactly 1/2.
  double below = 0.0;
  for (double v : samples)
    below += v < kappa ? 1.0 : (v == kappa ? 0.5 : 0.0);
  const double f = below / k;
  const double p = 2.0 * std::min(f, 1.0 - f);
  return std::clamp(p, 2.0 / k, 1.0);
}

IntervalSummary fiducial_summary(const std::vector<double> &samples,
                                 double alpha, bool check) {
  if (check && static_cast<int>(samples.size()) < min_interval_samples)
    throw UsageError("TooFewDraws",
                     "fiducial intervals need at least " +
                         std::to_string(min_interval_samples) + " draws, got " +
                         std::to_string(samples.size()));
  IntervalSummary s;
  s.method = IntervalMethod::FiducialHDI;
  s.alpha = alpha;
  std::tie(s.lower, s.upper) = hdi(samples, alpha);
  s.estimate = fiducial_mode(samples);
  s.width = s.upper - s.lower;
  s.gen_p_value = generalized_p_value(samples, 0.0);
  return s;
}

} // namespace zimed
