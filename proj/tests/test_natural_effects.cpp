#include "support.hpp"

#include "zimed/error.hpp"
#include "zimed/mediator.hpp"
#include "zimed/natural_effects.hpp"
#include "zimed/pipeline.hpp"

#include <doctest.h>

using namespace zimed;

namespace {

ExposureFit fake_exposure(const Dataset &d) {
  ExposureFit f;
  f.alpha = Eigen::VectorXd::Zero(2);
  f.fitted_prob.resize(d.n());
  for (int i = 0; i < d.n(); ++i)
    f.fitted_prob(i) = 0.3 + 0.4 * (i % 3) / 2.0;
  f.marginal_exposed = f.fitted_prob.mean();
  return f;
}

ThetaVector params(int p, double beta1) {
  ThetaVector t = ThetaVector::zeros(p, 1);
  for (int j = 0; j < p; ++j) {
    t.beta_z0(j) = -1.0 + 0.3 * j;
    t.beta_l0(j) = 0.2 - 0.1 * j;
    t.beta_0(j) = 0.4;
    t.beta_1(j) = beta1;
    t.beta_2(j, 0) = 0.5;
  }
  t.sigma_delta = 0.4;
  return t;
}

} // namespace

TEST_CASE("expanded rows enumerate every pseudo-exposure vector") {
  const Dataset d = testing::small_dataset(5, 3, 1);
  const ExpandedData ex(d);
  CHECK(ex.rows() == 5 * 8);
  CHECK(ex.subject(17) == 2);
  CHECK(ex.arrangement(17) == 1);
  CHECK(ex.pseudo_exposure(17, 0) == 1);
  CHECK(ex.pseudo_exposure(17, 1) == 0);
  CHECK_THROWS_AS(ExpandedData(d, 2), DataError);
}

TEST_CASE("no exposure-mediator effect leaves only the exposure factor") {
  const Dataset d = testing::small_dataset(40, 3, 2);
  const ExpandedData ex(d);
  const ExposureFit e = fake_exposure(d);
  const ThetaVector t = params(3, 0.0);
  const Eigen::VectorXd delta = Eigen::VectorXd::Constant(d.n(), 0.3);
  for (const WeightTable &w :
       {compute_weights(ex, Family::ZINegBinomial, t, e, delta, d),
        compute_marginal_weights(ex, Family::ZINegBinomial, t, e, d)}) {
    CHECK(w.log_ratio.cwiseAbs().maxCoeff() <= 1e-12);
    for (std::int64_t r = 0; r < ex.rows(); ++r)
      CHECK(std::abs(w.weight(r) - w.exposure_factor(ex.subject(r))) <=
            1e-12 * w.exposure_factor(ex.subject(r)));
  }
}

TEST_CASE("observed arrangement has ratio product exactly one") {
  const Dataset d = testing::small_dataset(30, 2, 3);
  const ExpandedData ex(d);
  const ExposureFit e = fake_exposure(d);
  const ThetaVector t = params(2, 0.8);
  const Eigen::VectorXd delta = Eigen::VectorXd::Zero(d.n());
  for (const WeightTable &w :
       {compute_weights(ex, Family::ZINegBinomial, t, e, delta, d),
        compute_marginal_weights(ex, Family::ZINegBinomial, t, e, d)}) {
    for (int i = 0; i < d.n(); ++i) {
      const int l = d.exposure(i) ? 3 : 0;
      CHECK(w.weight(i * 4 + l) == w.exposure_factor(i));
      CHECK(w.exposure_factor(i) ==
            doctest::Approx(e.marginal(d.exposure(i)) /
                            e.conditional(i, d.exposure(i))));
    }
  }
}

TEST_CASE("single-mediator weight matches a scalar oracle") {
  Dataset d = testing::small_dataset(6, 1, 4);
  const ExpandedData ex(d);
  const ExposureFit e = fake_exposure(d);
  const ThetaVector t = params(1, 0.7);
  Eigen::VectorXd delta(d.n());
  for (int i = 0; i < d.n(); ++i)
    delta(i) = 0.1 * i - 0.2;
  const WeightTable w = compute_weights(ex, Family::ZINegBinomial, t, e, delta, d);
  const double pi = 1.0 / (1.0 + std::exp(1.0)), phi = std::exp(0.2);
  for (int i = 0; i < d.n(); ++i) {
    const int a0 = d.exposure(i);
    auto lam = [&](int a) {
      return std::exp(0.4 + 0.7 * a + 0.5 * d.c2(i, 0) + delta(i));
    };
    const int m = d.mediators(i, 0);
    const double ratio = testing::zinb_pmf(m, lam(1 - a0), pi, phi) /
                         testing::zinb_pmf(m, lam(a0), pi, phi);
    const double ef = (a0 ? e.marginal_exposed : 1 - e.marginal_exposed) /
                      (a0 ? e.fitted_prob(i) : 1 - e.fitted_prob(i));
    const int other = a0 ? 0 : 1;
    CHECK(std::abs(w.weight(i * 2 + other) - ef * ratio) <=
          1e-10 * ef * ratio);
  }
}

TEST_CASE("marginal weights integrate the shared effect jointly") {
  const Dataset d = testing::small_dataset(8, 2, 5);
  const ExpandedData ex(d);
  const ExposureFit e = fake_exposure(d);
  const ThetaVector t = params(2, 0.9);
  const WeightTable w =
      compute_marginal_weights(ex, Family::ZINegBinomial, t, e, d, 9);
  const double s = t.sigma_delta;
  for (int i = 0; i < d.n(); ++i) {
    auto joint = [&](int a_first, int a_second) {
      const int grid = 8001;
      const double lo = -10 * s, h = 20 * s / (grid - 1);
      double acc = 0.0;
      for (int g = 0; g < grid; ++g) {
        const double delta = lo + g * h;
        double f = testing::normal_pdf(delta, s);
        const int a[2] = {a_first, a_second};
        for (int j = 0; j < 2; ++j)
          f *= testing::zinb_pmf(
              d.mediators(i, j),
              std::exp(0.4 + 0.9 * a[j] + 0.5 * d.c2(i, 0) + delta),
              1.0 / (1.0 + std::exp(-t.beta_z0(j))), std::exp(t.beta_l0(j)));
        acc += (g == 0 || g == grid - 1 ? 0.5 : 1.0) * f;
      }
      return acc * h;
    };
    const int a0 = d.exposure(i);
    const double base = joint(a0, a0);
    for (int l = 0; l < 4; ++l) {
      const double want =
          w.exposure_factor(i) * joint(l & 1, (l >> 1) & 1) / base;
      CHECK(w.weight(i * 4 + l) == doctest::Approx(want).epsilon(1e-4));
    }
  }
}

TEST_CASE("unit weights reduce to ordinary least squares") {
  const Dataset d = testing::small_dataset(50, 2, 6);
  const ExpandedData ex(d);
  WeightTable w;
  w.weight = Eigen::VectorXd::Ones(ex.rows());
  const OutcomeFit f = fit_outcome_wls(ex, w, {WlsCovariance::Model, false});
  Eigen::MatrixXd x(ex.rows(), 4);
  Eigen::VectorXd y(ex.rows());
  for (std::int64_t r = 0; r < ex.rows(); ++r) {
    x(r, 0) = 1.0;
    x(r, 1) = ex.observed_exposure(r);
    x(r, 2) = ex.pseudo_exposure(r, 0);
    x(r, 3) = ex.pseudo_exposure(r, 1);
    y(r) = ex.outcome(r);
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  for (int k = 0; k < 4; ++k)
    CHECK(f.effects.theta(k) == doctest::Approx(beta(k)).epsilon(1e-10));
  CHECK(f.effects.nde == f.effects.theta(1));
  CHECK(f.effects.nie(1) == f.effects.theta(3));
  const Eigen::VectorXd resid = y - x * beta;
  const double s2 = resid.squaredNorm() / (ex.rows() - 4);
  const Eigen::MatrixXd cov = s2 * (x.transpose() * x).inverse();
  CHECK((f.cov - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cluster-robust covariance matches an explicit sandwich") {
  const Dataset d = testing::small_dataset(40, 1, 7);
  const ExpandedData ex(d);
  const ExposureFit e = fake_exposure(d);
  const WeightTable w = compute_weights(ex, Family::ZINegBinomial, params(1, 0.5),
                                        e, Eigen::VectorXd::Zero(d.n()), d);
  const OutcomeFit f = fit_outcome_wls(ex, w);
  Eigen::MatrixXd x(ex.rows(), 3);
  for (std::int64_t r = 0; r < ex.rows(); ++r)
    x.row(r) << 1.0, ex.observed_exposure(r), ex.pseudo_exposure(r, 0);
  const Eigen::MatrixXd bread =
      (x.transpose() * w.weight.asDiagonal() * x).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < d.n(); ++i) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(3);
    for (int l = 0; l < 2; ++l) {
      const int r = i * 2 + l;
      const double res = ex.outcome(r) - x.row(r).dot(f.effects.theta.head(3));
      score += w.weight(r) * res * x.row(r).transpose();
    }
    meat += score * score.transpose();
  }
  const double n = d.n();
  const Eigen::MatrixXd want = n / (n - 1) * bread * meat * bread;
  CHECK((f.cov - want).cwiseAbs().maxCoeff() < 1e-10 * want.cwiseAbs().maxCoeff());
}

TEST_CASE("weight scaling and subject permutation") {
  const Dataset d = testing::small_dataset(60, 2, 8);
  const ExpandedData ex(d);
  const ExposureFit e = fake_exposure(d);
  const ThetaVector t = params(2, 0.5);
  const Eigen::VectorXd delta = Eigen::VectorXd::Zero(d.n());
  WeightTable w = compute_weights(ex, Family::ZINegBinomial, t, e, delta, d);
  const OutcomeFit a = fit_outcome_wls(ex, w);
  w.weight *= 37.5;
  const OutcomeFit b = fit_outcome_wls(ex, w);
  CHECK((a.effects.theta - b.effects.theta).cwiseAbs().maxCoeff() < 1e-10);

  std::vector<int> idx(d.n());
  for (int i = 0; i < d.n(); ++i)
    idx[i] = (i * 7) % d.n();
  const Dataset dp = d.subset(idx);
  ExposureFit ep = e;
  for (int i = 0; i < d.n(); ++i)
    ep.fitted_prob(i) = e.fitted_prob(idx[i]);
  const WeightTable wp = compute_weights(ExpandedData(dp), Family::ZINegBinomial,
                                         t, ep, delta, dp);
  const WeightTable w0 = compute_weights(ex, Family::ZINegBinomial, t, e, delta, d);
  for (int i = 0; i < d.n(); ++i)
    for (int l = 0; l < 4; ++l)
      CHECK(wp.weight(i * 4 + l) == doctest::Approx(w0.weight(idx[i] * 4 + l)));
}

TEST_CASE("rank deficiency is detected") {
  const Dataset d = testing::small_dataset(20, 1, 9);
  const ExpandedData ex(d);
  WeightTable w;
  w.weight = Eigen::VectorXd::Zero(ex.rows());
  for (std::int64_t r = 0; r < ex.rows(); ++r)
    if (ex.pseudo_exposure(r, 0) == ex.observed_exposure(r))
      w.weight(r) = 1.0;
  CHECK_THROWS_AS(fit_outcome_wls(ex, w), ConvergenceError);
}

TEST_CASE("effects scale with the exposure contrast") {
  Eigen::VectorXd th(4);
  th << 1.0, 2.0, 0.5, -0.25;
  const EffectEstimates e = effects_from_theta(th, 1, 0);
  CHECK(e.nde == 2.0);
  CHECK(e.nie(0) == 0.5);
  const EffectEstimates r = effects_from_theta(th, 0, 1);
  CHECK(r.nde == -2.0);
  CHECK(r.nie(1) == 0.25);
}

TEST_CASE("truncation caps at percentiles") {
  WeightTable w;
  w.weight.resize(101);
  for (int k = 0; k <= 100; ++k)
    w.weight(k) = k + 1.0;
  const int changed = truncate_weights(w, 0.1, 0.9);
  CHECK(changed == 20);
  CHECK(w.weight.minCoeff() == 11.0);
  CHECK(w.weight.maxCoeff() == 91.0);
  CHECK_THROWS_AS(truncate_weights(w, 0.9, 0.1), UsageError);
}

TEST_CASE("total effect is close to the sum of natural effects") {
  ScenarioConfig cfg;
  cfg.n = 3000;
  cfg.p = 2;
  cfg.beta0 = {0.5};
  const Dataset d = generate_dataset(cfg, 10);
  const PipelineResult r = run_pipeline(d, PipelineOptions{});
  // Exposure-weighted difference in means.
  double s1 = 0, w1 = 0, s0 = 0, w0 = 0;
  for (int i = 0; i < d.n(); ++i) {
    const int a = d.exposure(i);
    const double wt = r.exposure.marginal(a) / r.exposure.conditional(i, a);
    (a ? s1 : s0) += wt * d.outcome(i);
    (a ? w1 : w0) += wt;
  }
  const double te = s1 / w1 - s0 / w0;
  const auto &fx = r.outcome.effects;
  CHECK(std::abs(te - (fx.nde + fx.nie.sum())) < 0.25);
}
