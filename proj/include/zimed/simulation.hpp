#ifndef ZIMED_SIMULATION_HPP
#define ZIMED_SIMULATION_HPP

#include "zimed/count_model.hpp"
#include "zimed/data.hpp"
#include "zimed/fiducial.hpp"
#include "zimed/intervals.hpp"
#include "zimed/natural_effects.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zimed {

// Data-generating design plus the analysis run on each replication.
// Per-taxon vectors of length 1 are recycled to p taxa.
struct ScenarioConfig {
  std::string name = "default";
  int n = 200;
  int p = 1;
  std::vector<double> pi{0.2};
  std::vector<double> phi{1.0};
  std::vector<double> beta0{-3.0};
  std::vector<double> beta1{0.6};
  std::vector<double> beta2{0.5};
  double alpha0 = 0.25;
  double alpha1 = -0.5;
  double gamma0 = 1.5;
  double gamma1 = 2.0;
  double gamma3 = 1.5;
  double gamma2_mean = 0.9;
  double gamma2_sd = 0.1;
  bool fix_gamma2 = false; // draw gamma_2j once per scenario, not per replication
  double sigma_delta_sq = 0.1;
  double noise_sd = 1.0;
  // Offsets: false => zeta = 1 (the gold-standard convention); true => uniform
  // integer sequencing depth in [10000, 100000].
  bool depth_offsets = false;
  Family generate_family = Family::ZINegBinomial;
  Family fit_family = Family::ZINegBinomial;

  int replications = 1000;
  std::vector<IntervalMethod> methods{IntervalMethod::FiducialHDI,
                                      IntervalMethod::Delta,
                                      IntervalMethod::NPB};
  double alpha = 0.05;
  int k_draws = 1000;
  std::optional<int> n_equiv;             // calibrated when absent
  std::vector<int> n_grid{100, 200, 400, 600, 800, 1000};
  int npb_reps = 200;
  WlsCovariance wls_covariance = WlsCovariance::ClusterRobust;
  DeltaMode fiducial_delta = DeltaMode::Marginal;
  std::uint64_t seed = 1;
  int threads = 0; // 0 => all cores

  double pi_at(int j) const;
  double phi_at(int j) const;
  double beta0_at(int j) const;
  double beta1_at(int j) const;
  double beta2_at(int j) const;
  // Throws UsageError("BadScenario") on invalid values.
  void validate() const;
};

// One simulated dataset. gamma_2j is drawn from its normal law unless fixed
// values are supplied.
Dataset generate_dataset(const ScenarioConfig &cfg, std::uint64_t seed,
                         const std::optional<Eigen::VectorXd> &gamma2 = {});

// Closed-form NIE_j under the generator (zeta = 1, gamma_2j at its mean):
//   gamma_2 (1 - pi) [exp(b0 + b1 + b2^2/2 + s^2/2) - exp(b0 + b2^2/2 + s^2/2)]
// Throws UsageError("UnsupportedGenerator") when the generator is not a
// zero-inflated count design this formula covers.
double gold_standard_nie(const ScenarioConfig &cfg, int j);
inline double gold_standard_nde(const ScenarioConfig &cfg) { return cfg.gamma1; }

struct MethodEffectResult {
  IntervalMethod method = IntervalMethod::FiducialHDI;
  std::string effect; // "nde" or "nie_<j>"
  double gsv = 0.0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double sensitivity = 0.0; // share of intervals excluding 0
  double bias = 0.0;        // mean estimate - gsv
  int effective = 0;
};

// Per replication, per method: one interval per effect (NDE first).
struct ReplicationRecord {
  bool ok = false;
  std::string error;
  std::map<IntervalMethod, std::vector<IntervalSummary>> intervals;
};

struct ScenarioResult {
  ScenarioConfig config;
  int n_equiv = 0;
  std::vector<MethodEffectResult> rows;
  std::vector<ReplicationRecord> replications;
  int failures = 0;
  bool failed = false; // TooManyFailures; rows empty
  std::string failure_reason;
};

// A replication fails when data generation, fitting or any requested method
// throws. More than 5% failures throws ConvergenceError("TooManyFailures"), or
// with throw_on_failure = false marks the result failed and leaves rows empty.
ScenarioResult run_scenario(const ScenarioConfig &cfg,
                            bool throw_on_failure = true);

// Equivalence number for a scenario, calibrated on one generated dataset.
EquivalenceCalibration calibrate_scenario(const ScenarioConfig &cfg);

// Axes: pi, phi, n, p, beta1, sigma_delta_sq, fit_family (as number codes:
// 0 poisson, 1 zip, 2 nb, 3 zinb). Cartesian product in axis order (last axis
// fastest); cell seeds derived from (base seed, cell index).
std::vector<ScenarioConfig>
scenario_grid(const ScenarioConfig &base,
              const std::vector<std::pair<std::string, std::vector<double>>> &axes);

// Named study presets: fig5 (pi x n), fig6 (p x n), fig7 (phi x n,
// sensitivity), misspec (ZINB data, ZIP fit, pi axis).
std::vector<ScenarioConfig> preset(const std::string &name,
                                   const ScenarioConfig &base);

} // namespace zimed

#endif
