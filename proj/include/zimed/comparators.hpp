#ifndef ZIMED_COMPARATORS_HPP
#define ZIMED_COMPARATORS_HPP

#include "zimed/intervals.hpp"
#include "zimed/pipeline.hpp"

#include <cstdint>
#include <vector>

namespace zimed {

// Wald intervals, NDE first then NIE_1..NIE_p. The variance of each effect is
//   g' S* g + Var_WLS(effect)
// with g the central-difference gradient of the effect through the whole
// weights -> WLS map (step 1e-4 max(1, |theta_k|)) over the parameters S*
// covers. Throws ConvergenceError("SingularGradient") on a non-finite
// gradient or variance.
std::vector<IntervalSummary> delta_ci(const Dataset &data,
                                      const PipelineResult &base,
                                      const PipelineOptions &opts,
                                      double alpha);

struct NpbOptions {
  int reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;
  bool identity_resample = false; // every resample is the original sample
};

struct NpbResult {
  std::vector<IntervalSummary> intervals; // NDE first
  Eigen::MatrixXd estimates;              // effective x (p + 1)
  int effective = 0;
  int dropped = 0;
};

// Subject-level bootstrap of the full pipeline; percentile intervals from
// order statistics, point estimate from the original sample. Refits start from
// the original estimate. Throws UsageError("TooFewReplicates") when reps < 200
// and ConvergenceError("TooManyFailures") when fewer than half converge. Intervals use the converged resamples only.
NpbResult npb_ci(const Dataset &data, const PipelineResult &base,
                 const PipelineOptions &opts, const NpbOptions &npb);

} // namespace zimed

#endif
