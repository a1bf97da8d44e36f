#include "zimed/natural_effects.hpp"

#include "zimed/error.hpp"
#include "zimed/mediator.hpp"
#include "zimed/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <vector>

namespace zimed {

ExpandedData::ExpandedData(const Dataset &data, int p_max)
    : n_(data.n()), p_(data.p()), exposure_(data.exposure),
      outcome_(data.outcome), c3_(data.c3) {
  if (p_ > p_max)
    throw DataError("TooManyMediators",
                    std::to_string(p_) + " mediators exceed the cap of " +
                        std::to_string(p_max));
  if (p_ < 1)
    throw DataError("NoMediators", "dataset has no mediator columns");
}

ExpandedData expand_counterfactuals(const Dataset &data, int p_max) {
  return ExpandedData(data, p_max);
}

namespace {

void check_dims(const ExpandedData &ex, const ThetaVector &theta,
                const ExposureFit &exposure, const Dataset &data) {
  if (ex.n() != data.n() || ex.p() != data.p() || theta.p() != data.p() ||
      exposure.fitted_prob.size() != data.n() || theta.r2() != data.r2())
    throw DataError("LengthMismatch",
                    "expanded data, parameters and exposure fit disagree");
}

[[noreturn]] void zero_density(int i, int j) {
  throw ConvergenceError("ZeroDensity",
                         "mediator mass underflows for subject " +
                             std::to_string(i) + ", taxon " +
                             std::to_string(j));
}

// Fills weight from exposure_factor and log_ratio.
void assemble(const ExpandedData &ex, WeightTable &w) {
  const int n = ex.n();
  const int p = ex.p();
  const int L = ex.arrangements();
  w.weight.resize(ex.rows());
  for (int i = 0; i < n; ++i) {
    const int a0 = ex.exposure()(i);
    const double log_ef = std::log(w.exposure_factor(i));
    for (int l = 0; l < L; ++l) {
      double lw = log_ef;
      for (int j = 0; j < p; ++j)
        if (((l >> j) & 1) != a0)
          lw += w.log_ratio(i, j);
      const double v = std::exp(lw);
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConvergenceError("ZeroDensity",
                               "weight not positive and finite for subject " +
                                   std::to_string(i));
      w.weight(static_cast<std::int64_t>(i) * L + l) = v;
    }
  }
}

WeightTable start_table(const ExpandedData &ex, const ExposureFit &exposure) {
  WeightTable w;
  w.exposure_factor.resize(ex.n());
  w.log_ratio.resize(ex.n(), ex.p());
  for (int i = 0; i < ex.n(); ++i) {
    const int a0 = ex.exposure()(i);
    w.exposure_factor(i) = exposure.marginal(a0) / exposure.conditional(i, a0);
  }
  return w;
}

} // namespace

WeightTable compute_weights(const ExpandedData &expanded, Family family,
                            const ThetaVector &theta,
                            const ExposureFit &exposure,
                            const Eigen::VectorXd &delta_hat,
                            const Dataset &data) {
  check_dims(expanded, theta, exposure, data);
  if (delta_hat.size() != data.n())
    throw DataError("LengthMismatch", "delta_hat length differs from n");
  const auto shapes = taxon_shapes(family, theta);
  WeightTable w = start_table(expanded, exposure);
  for (int i = 0; i < data.n(); ++i) {
    const int a0 = data.exposure(i);
    for (int j = 0; j < data.p(); ++j) {
      const int m = data.mediators(i, j);
      const double u0 = linear_predictor(theta, data, i, j, a0) + delta_hat(i);
      const double u1 =
          linear_predictor(theta, data, i, j, 1 - a0) + delta_hat(i);
      const double l0 = log_pmf(m, u0, shapes[j]);
      const double l1 = log_pmf(m, u1, shapes[j]);
      if (!std::isfinite(l0) || !std::isfinite(l1))
        zero_density(i, j);
      w.log_ratio(i, j) = l1 - l0;
    }
  }
  assemble(expanded, w);
  return w;
}

WeightTable compute_marginal_weights(const ExpandedData &expanded,
                                     Family family, const ThetaVector &theta,
                                     const ExposureFit &exposure,
                                     const Dataset &data, int nodes) {
  check_dims(expanded, theta, exposure, data);
  const auto shapes = taxon_shapes(family, theta);
  const NormalRule &rule = normal_rule(nodes);
  const double sigma = std::abs(theta.sigma_delta);
  std::vector<double> log_w(rule.weights.size());
  for (std::size_t q = 0; q < log_w.size(); ++q)
    log_w[q] = std::log(rule.weights[q]);

  auto marginal_log_pmf = [&](int m, double u, const TaxonShape &s,
                              const CountConstants &cc) {
    if (sigma == 0.0)
      return log_pmf(m, u, s, cc);
    double acc = -INFINITY;
    for (std::size_t q = 0; q < log_w.size(); ++q)
      acc = log_add_exp(acc,
                        log_w[q] + log_pmf(m, u + sigma * rule.nodes[q], s, cc));
    return acc;
  };

  // The shared effect couples the taxa, so each arrangement's mass is the
  // joint integral over delta rather than a product of per-taxon marginals.
  // log_ratio keeps the per-taxon marginal ratios for diagnostics only.
  WeightTable w = start_table(expanded, exposure);
  const int p = data.p();
  const int L = expanded.arrangements();
  const int nq = sigma == 0.0 ? 1 : static_cast<int>(log_w.size());
  std::vector<double> lp(static_cast<std::size_t>(p) * 2 * nq);
  std::vector<double> joint(nq);
  w.weight.resize(expanded.rows());
  for (int i = 0; i < data.n(); ++i) {
    const int a0 = data.exposure(i);
    for (int j = 0; j < p; ++j) {
      const int m = data.mediators(i, j);
      const CountConstants cc = count_constants(m, shapes[j], false);
      for (int a = 0; a < 2; ++a) {
        const double u = linear_predictor(theta, data, i, j, a);
        for (int q = 0; q < nq; ++q)
          lp[(j * 2 + a) * nq + q] = log_pmf(
              m, sigma == 0.0 ? u : u + sigma * rule.nodes[q], shapes[j], cc);
      }
      const double l0 = marginal_log_pmf(
          m, linear_predictor(theta, data, i, j, a0), shapes[j], cc);
      const double l1 = marginal_log_pmf(
          m, linear_predictor(theta, data, i, j, 1 - a0), shapes[j], cc);
      if (!std::isfinite(l0) || !std::isfinite(l1))
        zero_density(i, j);
      w.log_ratio(i, j) = l1 - l0;
    }
    auto log_joint = [&](int l) {
      double acc = -INFINITY;
      for (int q = 0; q < nq; ++q) {
        double s = sigma == 0.0 ? 0.0 : log_w[q];
        for (int j = 0; j < p; ++j)
          s += lp[(j * 2 + ((l >> j) & 1)) * nq + q];
        acc = log_add_exp(acc, s);
      }
      return acc;
    };
    const int observed = a0 ? L - 1 : 0;
    const double base = log_joint(observed);
    const double log_ef = std::log(w.exposure_factor(i));
    for (int l = 0; l < L; ++l) {
      const double v =
          l == observed ? w.exposure_factor(i)
                        : std::exp(log_ef + log_joint(l) - base);
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConvergenceError("ZeroDensity",
                               "weight not positive and finite for subject " +
                                   std::to_string(i));
      w.weight(static_cast<std::int64_t>(i) * L + l) = v;
    }
  }
  return w;
}

int truncate_weights(WeightTable &w, double lower_q, double upper_q) {
  if (!(lower_q >= 0.0 && lower_q < upper_q && upper_q <= 1.0))
    throw UsageError("BadTruncation", "truncation quantiles must satisfy "
                                      "0 <= lower < upper <= 1");
  std::vector<double> sorted(w.weight.data(),
                             w.weight.data() + w.weight.size());
  std::sort(sorted.begin(), sorted.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  const double lo = at(lower_q);
  const double hi = at(upper_q);
  int changed = 0;
  for (Eigen::Index r = 0; r < w.weight.size(); ++r) {
    const double v = std::clamp(w.weight(r), lo, hi);
    if (v != w.weight(r)) {
      w.weight(r) = v;
      ++changed;
    }
  }
  return changed;
}

void write_weights_csv(const ExpandedData &expanded, const WeightTable &w,
                       const Dataset &data, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw IOError("WriteFailed", "cannot open " + path);
  out << std::setprecision(17);
  out << "subject,arrangement,observed_exposure";
  for (int j = 0; j < expanded.p(); ++j)
    out << ",a_" << data.taxon_names[j];
  out << ",weight,exposure_factor";
  for (int j = 0; j < expanded.p(); ++j)
    out << ",ratio_" << data.taxon_names[j];
  out << '\n';
  for (std::int64_t r = 0; r < expanded.rows(); ++r) {
    const int i = expanded.subject(r);
    const int a0 = expanded.observed_exposure(r);
    out << data.subject_id[i] << ',' << expanded.arrangement(r) << ',' << a0;
    for (int j = 0; j < expanded.p(); ++j)
      out << ',' << expanded.pseudo_exposure(r, j);
    out << ',' << w.weight(r) << ',' << w.exposure_factor(i);
    for (int j = 0; j < expanded.p(); ++j)
      out << ',' << w.ratio_factor(i, j, expanded.pseudo_exposure(r, j), a0);
    out << '\n';
  }
  if (!out)
    throw IOError("WriteFailed", "error writing " + path);
}

EffectEstimates effects_from_theta(const Eigen::VectorXd &theta, int a,
                                   int a_star) {
  if (theta.size() < 3)
    throw DataError("LengthMismatch", "outcome coefficients need p + 2 >= 3");
  const int p = static_cast<int>(theta.size()) - 2;
  const double contrast = a - a_star;
  EffectEstimates e;
  e.theta = theta;
  e.nde = theta(1) * contrast;
  e.nie = theta.segment(2, p) * contrast;
  return e;
}

OutcomeFit fit_outcome_wls(const ExpandedData &expanded, const WeightTable &w,
                           const WlsOptions &opts) {
  const int n = expanded.n();
  const int p = expanded.p();
  const int L = expanded.arrangements();
  const int r3 = opts.include_c3 ? static_cast<int>(expanded.c3().cols()) : 0;
  const int k = p + 2 + r3;
  if (w.weight.size() != expanded.rows())
    throw DataError("LengthMismatch", "weights do not match expanded rows");

  auto fill_row = [&](int i, int l, Eigen::VectorXd &x) {
    x(0) = 1.0;
    x(1) = expanded.exposure()(i);
    for (int j = 0; j < p; ++j)
      x(2 + j) = (l >> j) & 1;
    for (int c = 0; c < r3; ++c)
      x(2 + p + c) = expanded.c3()(i, c);
  };

  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd xtwy = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd x(k);
  for (int i = 0; i < n; ++i) {
    const double y = expanded.outcome()(i);
    for (int l = 0; l < L; ++l) {
      const double wt = w.weight(static_cast<std::int64_t>(i) * L + l);
      fill_row(i, l, x);
      xtwx.selfadjointView<Eigen::Lower>().rankUpdate(x, wt);
      xtwy.noalias() += (wt * y) * x;
    }
  }
  xtwx = xtwx.selfadjointView<Eigen::Lower>();

  // Scale-free conditioning check before the Cholesky solve.
  const Eigen::VectorXd d = xtwx.diagonal().cwiseMax(1e-300).cwiseSqrt();
  const Eigen::MatrixXd corr =
      d.cwiseInverse().asDiagonal() * xtwx * d.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr,
                                                     Eigen::EigenvaluesOnly);
  Eigen::LLT<Eigen::MatrixXd> llt(xtwx);
  if (llt.info() != Eigen::Success || eig.eigenvalues()(0) < 1e-12 * k)
    throw ConvergenceError("RankDeficient",
                           "weighted design matrix is not full rank");

  const Eigen::VectorXd coef = llt.solve(xtwy);
  const Eigen::MatrixXd bread = llt.solve(Eigen::MatrixXd::Identity(k, k));

  // Residual pass: weighted SSE and per-subject scores.
  double sse = 0.0;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd score(k);
  for (int i = 0; i < n; ++i) {
    const double y = expanded.outcome()(i);
    score.setZero();
    for (int l = 0; l < L; ++l) {
      const double wt = w.weight(static_cast<std::int64_t>(i) * L + l);
      fill_row(i, l, x);
      const double e = y - x.dot(coef);
      sse += wt * e * e;
      score.noalias() += (wt * e) * x;
    }
    meat.selfadjointView<Eigen::Lower>().rankUpdate(score);
  }
  meat = meat.selfadjointView<Eigen::Lower>();

  OutcomeFit fit;
  const double rows = static_cast<double>(expanded.rows());
  fit.sigma2 = sse / std::max(rows - k, 1.0);
  Eigen::MatrixXd cov;
  if (opts.covariance == WlsCovariance::Model)
    cov = fit.sigma2 * bread;
  else
    cov = bread * meat * bread * (n / std::max(n - 1.0, 1.0));
  cov = 0.5 * (cov + cov.transpose()).eval();
  fit.cov = cov.topLeftCorner(p + 2, p + 2);
  fit.effects = effects_from_theta(coef.head(p + 2));
  return fit;
}

} // namespace zimed
