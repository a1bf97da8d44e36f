#ifndef ZIMED_MEDIATOR_HPP
#define ZIMED_MEDIATOR_HPP

#include "zimed/count_model.hpp"
#include "zimed/data.hpp"
#include "zimed/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace zimed {

// Joint mediator model: for subject i and taxon j
//   log lambda_ij = beta_0j + beta_1j A_i + beta_2j' C2_i + log zeta_i + delta_i
//   M_ij | delta_i ~ zero-inflated count law (pi_j, phi_j)
// with one random effect delta_i ~ N(0, sigma_delta^2) shared by all taxa.
//
// The marginal likelihood integrates delta_i with adaptive Gauss-Hermite
// quadrature: nodes are recentred at the posterior mode of each subject and
// scaled by the posterior curvature there.
class MarginalLikelihood {
public:
  MarginalLikelihood(const Dataset &data, Family family, int quad_nodes = 15);

  double value(const ThetaVector &theta) const;
  // Gradient in the packed layout (natural sigma_delta scale). Entries for
  // parameters the family does not use are zero.
  double value_and_gradient(const ThetaVector &theta,
                            Eigen::VectorXd &grad) const;

  // Posterior mode of z = delta / sigma per subject (|z| <= 6), plus the
  // curvature -d2/dz2 of the log posterior there.
  struct Mode {
    double z = 0.0;
    double curvature = 1.0;
  };
  std::vector<Mode> posterior_modes(const ThetaVector &theta,
                                    double tol = 1e-10) const;

  Family family() const { return family_; }
  const Dataset &data() const { return *data_; }

private:
  struct Prepared;
  Prepared prepare(const ThetaVector &theta) const;
  Mode mode_for(const Prepared &prep, int i, double tol) const;
  double subject(const Prepared &prep, int i, Eigen::VectorXd *grad) const;

  const Dataset *data_;
  Family family_;
  int quad_nodes_;
  Eigen::VectorXd log_offset_;
};

double log_marginal_likelihood(const ThetaVector &theta, const Dataset &data,
                               Family family, int quad_nodes = 15);

// Which packed entries the family estimates.
std::vector<bool> free_parameters(Family family, int p, int r2);

struct FitOptions {
  int quad_nodes = 15;
  double tol = 1e-6;
  int max_iter = 500;
  bool covariance = true; // compute cov_star from the observed information
  int restarts = 3;       // jittered restarts when the first start fails
  bool throw_on_failure = true;
  std::optional<ThetaVector> start;
};

struct MediatorFit {
  ThetaVector theta_hat;
  Family family = Family::ZINegBinomial;
  Eigen::MatrixXd cov_star; // P x P, zero rows for fixed parameters
  Eigen::VectorXd delta_hat;
  double log_lik = 0.0;
  double aic = 0.0;
  int n_free = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<bool> free_mask;
  std::vector<std::string> warnings;
};

// Maximum marginal likelihood. sigma_delta is optimized on the log scale.
// Throws ConvergenceError("NonConvergence") when every start fails (unless
// opts.throw_on_failure is false).
MediatorFit fit_mediator_model(const Dataset &data, Family family,
                               const FitOptions &opts = {});

// Observed-information covariance: inverse of the negative finite-difference
// Hessian of the log-likelihood (central differences of the gradient, step
// 1e-4 max(1, |theta|)). Falls back to a pseudo-inverse with a warning.
// Parameters at a bound, or with a standard error above a quarter of their box
// width (not identified by the data), are held fixed: zero rows and columns.
Eigen::MatrixXd information_covariance(const MarginalLikelihood &lik,
                                       const ThetaVector &theta,
                                       const std::vector<bool> &free_mask,
                                       std::vector<std::string> &warnings);

// Posterior modes delta_i given the fitted parameters (Newton, tol 1e-8,
// clamped to +-6 sigma).
Eigen::VectorXd empirical_bayes_effects(const MediatorFit &fit,
                                        const Dataset &data);

struct ModelRank {
  Family family;
  double aic = 0.0;
  double log_lik = 0.0;
  int n_params = 0;
  bool ok = false;
  std::string error;
};

// Ascending AIC, ties broken by fewer parameters. Failed fits are listed
// after the survivors with their diagnostics.
std::vector<ModelRank> model_selection(const Dataset &data,
                                       const std::vector<Family> &families,
                                       const FitOptions &opts = {});

// New mediator counts drawn from the fitted model at the same covariates
// and offsets, with fresh random effects.
Dataset simulate_mediators(const Dataset &data, Family family,
                           const ThetaVector &theta, Rng &rng);

// Linear predictor without the random effect.
double linear_predictor(const ThetaVector &theta, const Dataset &data, int i,
                        int j, int exposure);

// Clamps every coefficient to the optimizer box and sigma_delta to
// [0, exp(2)] (taking |sigma_delta| first).
ThetaVector clamp_to_bounds(const ThetaVector &theta);

// Per-taxon shapes for a parameter vector.
std::vector<TaxonShape> taxon_shapes(Family family, const ThetaVector &theta);

} // namespace zimed

#endif
