#ifndef ZIMED_NATURAL_EFFECTS_HPP
#define ZIMED_NATURAL_EFFECTS_HPP

#include "zimed/count_model.hpp"
#include "zimed/data.hpp"
#include "zimed/exposure.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace zimed {

inline constexpr int default_max_mediators = 15;

// Counterfactual replication: 2^p rows per subject, one per pseudo-exposure
// vector. Row r belongs to subject r >> p with arrangement l = r & (2^p - 1);
// mediator j's pseudo-exposure is bit j of l (mediator 1 least significant).
class ExpandedData {
public:
  ExpandedData() = default;
  ExpandedData(const Dataset &data, int p_max = default_max_mediators);

  int n() const { return n_; }
  int p() const { return p_; }
  std::int64_t rows() const { return static_cast<std::int64_t>(n_) << p_; }
  int arrangements() const { return 1 << p_; }

  int subject(std::int64_t row) const { return static_cast<int>(row >> p_); }
  int arrangement(std::int64_t row) const {
    return static_cast<int>(row & (arrangements() - 1));
  }
  int observed_exposure(std::int64_t row) const {
    return exposure_(subject(row));
  }
  int pseudo_exposure(std::int64_t row, int j) const {
    return (arrangement(row) >> j) & 1;
  }
  double outcome(std::int64_t row) const { return outcome_(subject(row)); }

  const Eigen::VectorXi &exposure() const { return exposure_; }
  const Eigen::VectorXd &outcome() const { return outcome_; }
  const Eigen::MatrixXd &c3() const { return c3_; }

private:
  int n_ = 0;
  int p_ = 0;
  Eigen::VectorXi exposure_;
  Eigen::VectorXd outcome_;
  Eigen::MatrixXd c3_;
};

// Throws DataError("TooManyMediators") when p > p_max.
ExpandedData expand_counterfactuals(const Dataset &data,
                                    int p_max = default_max_mediators);

// Mediation weights aligned to ExpandedData rows:
//   W_il = P(A = A_i0) / P(A = A_i0 | C1_i)
//          * prod_j P(M_ij | A = A_ilj, C2_i, delta_i) / P(M_ij | A = A_i0, ...)
struct WeightTable {
  Eigen::VectorXd weight;
  Eigen::VectorXd exposure_factor; // per subject
  // log P(M_ij | 1 - A_i0) - log P(M_ij | A_i0); per subject x taxon.
  Eigen::MatrixXd log_ratio;

  // Ratio factor of taxon j in a row whose pseudo-exposure for j is `pseudo`.
  double ratio_factor(int i, int j, int pseudo, int observed) const {
    return pseudo == observed ? 1.0 : std::exp(log_ratio(i, j));
  }
};

// Mediator masses conditional on the plug-in random effects delta_hat.
WeightTable compute_weights(const ExpandedData &expanded, Family family,
                            const ThetaVector &theta,
                            const ExposureFit &exposure,
                            const Eigen::VectorXd &delta_hat,
                            const Dataset &data);

// Joint mediator masses of each arrangement integrated over
// delta ~ N(0, sigma_delta^2) with a Gauss-Hermite rule of `nodes` points.
// Weights do not factor over taxa here; log_ratio holds the per-taxon
// marginal ratios for diagnostics.
WeightTable compute_marginal_weights(const ExpandedData &expanded,
                                     Family family, const ThetaVector &theta,
                                     const ExposureFit &exposure,
                                     const Dataset &data, int nodes = 9);

// Symmetric percentile cap, e.g. (0.01, 0.99). Returns #weights changed.
int truncate_weights(WeightTable &w, double lower_q, double upper_q);

void write_weights_csv(const ExpandedData &expanded, const WeightTable &w,
                       const Dataset &data, const std::string &path);

struct EffectEstimates {
  Eigen::VectorXd theta; // (theta, theta_0, theta_1..theta_p)
  double nde = 0.0;
  Eigen::VectorXd nie;
  bool conditional_on_delta = true;
};

// NDE = theta_0 (a - a*), NIE_j = theta_j (a - a*).
EffectEstimates effects_from_theta(const Eigen::VectorXd &theta, int a = 1,
                                   int a_star = 0);

enum class WlsCovariance {
  Model,         // sigma^2 (X'WX)^-1 over expanded rows
  ClusterRobust, // sandwich clustered on subject
};

struct WlsOptions {
  WlsCovariance covariance = WlsCovariance::ClusterRobust;
  bool include_c3 = false;
};

struct OutcomeFit {
  EffectEstimates effects;
  Eigen::MatrixXd cov; // covariance of the leading p + 2 coefficients
  double sigma2 = 0.0;
};

// Weighted least squares for the marginal natural-effects model
//   E[Y | A_0, A_l] = theta + theta_0 A_0 + sum_j theta_j A_lj
// via the normal equations (Cholesky). Throws ConvergenceError("RankDeficient").
OutcomeFit fit_outcome_wls(const ExpandedData &expanded, const WeightTable &w,
                           const WlsOptions &opts = {});

} // namespace zimed

#endif
