#ifndef ZIMED_FIDUCIAL_HPP
#define ZIMED_FIDUCIAL_HPP

#include "zimed/exposure.hpp"
#include "zimed/intervals.hpp"
#include "zimed/mediator.hpp"
#include "zimed/pipeline.hpp"
#include "zimed/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace zimed {

// Bartlett factor: lower-triangular U with N(0, 1) below the diagonal and
// u_ii = sqrt(chi^2_{N - i + 1}) (1-based i), so UU' ~ W_P(N, I).
// Throws UsageError("DegreesOfFreedomTooSmall") unless N > P + 2.
Eigen::MatrixXd sample_wishart_factor(int P, int N, Rng &rng);

// Fiducial quantity for a parameter vector with estimate `est` and covariance
// estimate S:  est - B Z  with  B = chol(N S) U^{-1},  Z ~ N(0, I).
// Rows of S with a zero diagonal (parameters held fixed) are left at `est`.
class FiducialSampler {
public:
  FiducialSampler(const Eigen::VectorXd &est, const Eigen::MatrixXd &s, int N);

  Eigen::VectorXd draw(Rng &rng) const;
  // With explicit U (active x active) and Z (active).
  Eigen::VectorXd draw(const Eigen::MatrixXd &u, const Eigen::VectorXd &z) const;

  int active() const { return static_cast<int>(active_.size()); }
  int n_equiv() const { return n_; }
  const Eigen::MatrixXd &cholesky() const { return t_; }

private:
  Eigen::VectorXd est_;
  std::vector<int> active_;
  Eigen::MatrixXd t_; // chol(N S) on the active block
  int n_;
};

// One draw of Theta; sigma_delta reported as |draw|.
ThetaVector fiducial_theta_draw(const ThetaVector &theta_hat,
                                const Eigen::MatrixXd &s_star, int N, Rng &rng);

// (pi_j, phi_j) = (expit(beta_z0j), exp(beta_l0j)).
std::pair<Eigen::VectorXd, Eigen::VectorXd>
fiducial_derived_params(const ThetaVector &theta_tilde);

struct BootstrapCovariance {
  Eigen::MatrixXd s_n;                  // divisor N = effective - 1
  std::vector<Eigen::VectorXd> estimates; // packed refits, in replicate order
  int requested = 0;
  int dropped = 0;
};

// Parametric bootstrap: n_reps + 1 datasets from the fitted model, refit,
// sample covariance with divisor N. Non-converged refits are replaced from
// further streams (at most 2 (n_reps + 1) attempts). Throws UsageError("TooFewReplicates") when
// n_reps < 50.
BootstrapCovariance bootstrap_covariance(const Dataset &data,
                                         const MediatorFit &fit, int n_reps,
                                         std::uint64_t seed, int threads = 0);

// Covariance from the first N + 1 estimates, divisor N.
Eigen::MatrixXd covariance_of(const std::vector<Eigen::VectorXd> &estimates,
                              int N);

enum class EigenNorm { L1, L2 };

// ||eig(a) - eig(b)|| with eigenvalues sorted descending.
double eigen_distance(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b,
                      EigenNorm norm);

struct EquivalenceCalibration {
  int n_equiv = 0;
  double distance = 0.0;
  int bootstrap_reps = 0; // N + 1
  std::vector<std::pair<int, double>> search_trace;
  bool within_tolerance = false;
  std::vector<std::string> warnings;
};

inline const std::vector<int> default_equivalence_grid{100, 200, 400,
                                                       600, 800, 1000};

// Smallest grid N with distance <= tol, else the argmin with a warning. All
// candidates share one nested sequence of max(grid) + 1 bootstrap refits.
EquivalenceCalibration
equivalence_number(const Dataset &data, const MediatorFit &fit,
                   const std::vector<int> &grid = default_equivalence_grid,
                   double tol = 0.002, EigenNorm norm = EigenNorm::L2,
                   std::uint64_t seed = 1, int threads = 0);

// Distance search on precomputed bootstrap refits. Eigenvalues are compared on
// the parameters with positive variance in S* (held-fixed ones are excluded).
EquivalenceCalibration
equivalence_from_estimates(const Eigen::MatrixXd &s_star,
                           const std::vector<Eigen::VectorXd> &estimates,
                           const std::vector<int> &grid, double tol,
                           EigenNorm norm);

struct FiducialOptions {
  int k = 2000;
  int n_equiv = 600;
  double alpha = 0.05;
  DeltaMode delta = DeltaMode::Marginal; // Marginal => unconditional draws
  int marginal_nodes = 9;
  WlsOptions wls;
  bool replicate_outcome = true; // fiducial replicate of the WLS coefficients
  std::uint64_t seed = 1;
  int threads = 0;
};

struct FiducialDraws {
  int k = 0;           // effective draws
  int requested = 0;
  Eigen::VectorXd nde_draws;
  Eigen::MatrixXd nie_draws; // k x p
  Eigen::VectorXd sigma_delta_draws;
  bool conditional = false;
  std::vector<std::string> dropped; // "draw <k>: <stage>: <message>"
};

inline constexpr int min_fiducial_draws = 500;

// K fiducial draws of (NDE, NIE_1..NIE_p). Draw k uses stream (seed, k), so
// the output does not depend on the thread count. Throws
// UsageError("TooFewDraws") when K < 500 and
// ConvergenceError("TooManyDroppedDraws") when fewer than 0.9 K survive.
FiducialDraws fiducial_nie_samples(const Dataset &data,
                                   const MediatorFit &med_fit,
                                   const ExposureFit &exp_fit,
                                   const FiducialOptions &opts);

// Per-effect fiducial intervals: NDE first, then NIE_1..NIE_p.
std::vector<IntervalSummary> fiducial_intervals(const FiducialDraws &draws,
                                                double alpha);

} // namespace zimed

#endif
