#include "support.hpp"

#include "zimed/error.hpp"
#include "zimed/exposure.hpp"
#include "zimed/gof.hpp"
#include "zimed/mediator.hpp"

#include <doctest.h>

#include <random>

using namespace zimed;

namespace {

ThetaVector truth(int p, double pi = 0.2, double phi = 1.0, double b0 = 0.0) {
  ThetaVector t = ThetaVector::zeros(p, 1);
  for (int j = 0; j < p; ++j) {
    t.beta_z0(j) = std::log(pi / (1.0 - pi));
    t.beta_l0(j) = std::log(phi);
    t.beta_0(j) = b0;
    t.beta_1(j) = 0.6;
    t.beta_2(j, 0) = 0.5;
  }
  t.sigma_delta = std::sqrt(0.1);
  return t;
}

// Trapezoid integral over delta on a wide fine grid, independent pmf.
double trapezoid_loglik(const ThetaVector &t, const Dataset &d) {
  const double s = t.sigma_delta;
  const int grid = 20001;
  const double lo = -12.0 * s, hi = 12.0 * s, h = (hi - lo) / (grid - 1);
  double total = 0.0;
  for (int i = 0; i < d.n(); ++i) {
    double acc = 0.0;
    for (int g = 0; g < grid; ++g) {
      const double delta = lo + g * h;
      double f = testing::normal_pdf(delta, s);
      for (int j = 0; j < d.p(); ++j) {
        const double lam =
            std::exp(t.beta_0(j) + t.beta_1(j) * d.exposure(i) +
                     t.beta_2(j, 0) * d.c2(i, 0) + std::log(d.offset(i)) + delta);
        f *= testing::zinb_pmf(d.mediators(i, j), lam, 1.0 / (1.0 + std::exp(-t.beta_z0(j))),
                               std::exp(t.beta_l0(j)));
      }
      acc += (g == 0 || g == grid - 1 ? 0.5 : 1.0) * f;
    }
    total += std::log(acc * h);
  }
  return total;
}

} // namespace

TEST_CASE("exposure model recovers its coefficients") {
  ScenarioConfig cfg;
  cfg.n = 10000;
  const Dataset d = generate_dataset(cfg, 3);
  // The generator draws A from C2; refit on that column.
  Dataset e = d;
  e.c1 = d.c2;
  const ExposureFit f = fit_exposure_model(e);
  CHECK(std::abs(f.alpha(0) - 0.25) < 0.1);
  CHECK(std::abs(f.alpha(1) + 0.5) < 0.1);
  CHECK(f.marginal_exposed == doctest::Approx(f.fitted_prob.mean()));
  for (int i = 0; i < e.n(); ++i) {
    CHECK(f.fitted_prob(i) > 0.0);
    CHECK(f.fitted_prob(i) < 1.0);
  }
}

TEST_CASE("perfect separation is reported") {
  Dataset d = testing::small_dataset(40, 1, 5);
  for (int i = 0; i < d.n(); ++i)
    d.c1(i, 0) = d.exposure(i) ? 1.0 + i : -1.0 - i;
  CHECK_THROWS_AS(fit_exposure_model(d), DataError);
}

TEST_CASE("adaptive quadrature matches a trapezoid oracle") {
  const Dataset d = testing::small_dataset(8, 2, 6, 0.5);
  for (double sigma : {0.1, 0.3162, 1.2}) {
    ThetaVector t = truth(2, 0.3, 0.8, 0.5);
    t.sigma_delta = sigma;
    CHECK(log_marginal_likelihood(t, d, Family::ZINegBinomial) ==
          doctest::Approx(trapezoid_loglik(t, d)).epsilon(1e-8));
  }
}

TEST_CASE("zero random-effect variance reduces to independent masses") {
  const Dataset d = testing::small_dataset(20, 2, 7);
  ThetaVector t = truth(2);
  t.sigma_delta = 0.0;
  double want = 0.0;
  for (int i = 0; i < d.n(); ++i)
    for (int j = 0; j < 2; ++j)
      want += std::log(testing::zinb_pmf(
          d.mediators(i, j),
          std::exp(t.beta_1(j) * d.exposure(i) + 0.5 * d.c2(i, 0)), 0.2, 1.0));
  CHECK(log_marginal_likelihood(t, d, Family::ZINegBinomial) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("all-zero cells under pi -> 1 contribute nothing") {
  Dataset d = testing::small_dataset(10, 1, 8);
  d.mediators.setZero();
  ThetaVector t = truth(1);
  t.beta_z0(0) = 40.0;
  CHECK(std::abs(log_marginal_likelihood(t, d, Family::ZINegBinomial)) < 1e-12);
}

TEST_CASE("likelihood is invariant to subject order") {
  const Dataset d = testing::small_dataset(50, 2, 9);
  std::vector<int> idx(d.n());
  for (int i = 0; i < d.n(); ++i)
    idx[i] = d.n() - 1 - i;
  const ThetaVector t = truth(2);
  CHECK(log_marginal_likelihood(t, d.subset(idx), Family::ZINegBinomial) ==
        doctest::Approx(log_marginal_likelihood(t, d, Family::ZINegBinomial))
            .epsilon(1e-12));
}

TEST_CASE("analytic gradient matches finite differences") {
  const Dataset d = testing::small_dataset(60, 2, 10);
  const MarginalLikelihood lik(d, Family::ZINegBinomial);
  Rng rng(12);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (int rep = 0; rep < 10; ++rep) {
    ThetaVector t = truth(2);
    Eigen::VectorXd v = pack_theta(t);
    for (int k = 0; k < v.size(); ++k)
      v(k) += jitter(rng);
    v(layout::sigma(2, 1)) = std::abs(v(layout::sigma(2, 1))) + 0.05;
    Eigen::VectorXd g;
    lik.value_and_gradient(unpack_theta(v, 2, 1), g);
    for (int k = 0; k < v.size(); ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(v(k)));
      Eigen::VectorXd a = v, b = v;
      a(k) += h;
      b(k) -= h;
      const double fd = (lik.value(unpack_theta(a, 2, 1)) -
                         lik.value(unpack_theta(b, 2, 1))) /
                        (2 * h);
      CHECK(g(k) == doctest::Approx(fd).epsilon(1e-4).scale(1e-3));
    }
  }
}

TEST_CASE("quadrature 15 to 31 nodes drift is negligible") {
  ScenarioConfig cfg;
  const Dataset d = generate_dataset(cfg, 13);
  const ThetaVector t = truth(1, 0.2, 1.0, -3.0);
  CHECK(std::abs(log_marginal_likelihood(t, d, Family::ZINegBinomial, 15) -
                 log_marginal_likelihood(t, d, Family::ZINegBinomial, 31)) <
        1e-4);
}

TEST_CASE("empirical Bayes modes match a grid search") {
  const Dataset d = testing::small_dataset(30, 3, 14);
  MediatorFit fit;
  fit.theta_hat = truth(3);
  fit.family = Family::ZINegBinomial;
  const Eigen::VectorXd eb = empirical_bayes_effects(fit, d);
  const double s = fit.theta_hat.sigma_delta;
  for (int i = 0; i < d.n(); ++i) {
    double best = -INFINITY, arg = 0.0;
    for (int g = -60000; g <= 60000; ++g) {
      const double delta = g * 1e-4 * s;
      double f = std::log(testing::normal_pdf(delta, s));
      for (int j = 0; j < 3; ++j)
        f += std::log(testing::zinb_pmf(
            d.mediators(i, j),
            std::exp(0.6 * d.exposure(i) + 0.5 * d.c2(i, 0) + delta), 0.2, 1.0));
      if (f > best) {
        best = f;
        arg = delta;
      }
    }
    CHECK(std::abs(eb(i) - arg) <= 1e-4 * s);
  }
}

TEST_CASE("zero variance gives zero random effects") {
  const Dataset d = testing::small_dataset(20, 1, 15);
  MediatorFit fit;
  fit.theta_hat = truth(1);
  fit.theta_hat.sigma_delta = 0.0;
  fit.family = Family::ZINegBinomial;
  CHECK(empirical_bayes_effects(fit, d).isZero());
}

TEST_CASE("fit recovers the generating parameters") {
  ScenarioConfig cfg;
  cfg.n = 2000;
  cfg.p = 2;
  cfg.beta0 = {0.0};
  const Dataset d = generate_dataset(cfg, 16);
  const MediatorFit fit = fit_mediator_model(d, Family::ZINegBinomial);
  CHECK(fit.converged);
  const Eigen::VectorXd est = pack_theta(fit.theta_hat);
  const Eigen::VectorXd tv = pack_theta(truth(2));
  int within = 0;
  for (int k = 0; k < est.size(); ++k) {
    const double se = std::sqrt(fit.cov_star(k, k));
    REQUIRE(se > 0.0);
    within += std::abs(est(k) - tv(k)) < 3.5 * se;
  }
  CHECK(within == est.size());
  CHECK(fit.delta_hat.size() == d.n());
  CHECK(fit.aic == doctest::Approx(-2 * fit.log_lik + 2 * fit.n_free));
  // Covariance is symmetric positive definite on the free block.
  CHECK((fit.cov_star - fit.cov_star.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.cov_star);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("model selection prefers the generating family") {
  int zinb_first = 0, poisson_first = 0;
  for (int rep = 0; rep < 5; ++rep) {
    ScenarioConfig cfg;
    cfg.n = 500;
    cfg.pi = {0.4};
    cfg.phi = {0.5};
    // Families are only separable once counts are informative; at the
    // default intercept nearly every count is zero and Poisson wins on AIC.
    cfg.beta0 = {2.0};
    const auto ranks =
        model_selection(generate_dataset(cfg, 100 + rep),
                        {Family::Poisson, Family::ZIPoisson, Family::NegBinomial,
                         Family::ZINegBinomial});
    zinb_first += ranks.front().family == Family::ZINegBinomial;

    cfg.pi = {0.0};
    cfg.generate_family = Family::Poisson;
    const auto pr = model_selection(generate_dataset(cfg, 200 + rep),
                                    {Family::Poisson, Family::ZINegBinomial});
    poisson_first += pr.front().family == Family::Poisson;
  }
  CHECK(zinb_first >= 3);
  CHECK(poisson_first >= 3);
}

TEST_CASE("non-identified zero inflation is held fixed") {
  // Dense counts with no excess zeros: the inflation intercept drifts to the
  // bound, so its covariance row is zeroed and a warning is raised.
  ScenarioConfig cfg;
  cfg.n = 300;
  cfg.pi = {0.0};
  cfg.beta0 = {1.0};
  cfg.generate_family = Family::Poisson;
  const MediatorFit fit =
      fit_mediator_model(generate_dataset(cfg, 17), Family::ZINegBinomial);
  CHECK(fit.cov_star(layout::z0(1, 0), layout::z0(1, 0)) == 0.0);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("goodness of fit") {
  ScenarioConfig cfg;
  cfg.n = 500;
  cfg.beta0 = {1.0};
  const Dataset d = generate_dataset(cfg, 18);
  const MediatorFit fit = fit_mediator_model(d, Family::ZINegBinomial);
  const TaxonGof g = goodness_of_fit_taxon(fit, d, 0);
  double obs = 0.0, exp = 0.0;
  for (const auto &c : g.cells) {
    obs += c.observed;
    exp += c.expected;
    CHECK(c.expected >= 5.0);
  }
  CHECK(obs == d.n());
  CHECK(exp == doctest::Approx(d.n()).epsilon(1e-6));
  CHECK(g.cells.front().lower == 0);
  CHECK(g.cells.front().upper == 0);
  CHECK(g.df == static_cast<int>(g.cells.size()) - 3);
  CHECK(g.p_value > 0.001);

  Dataset z = d;
  z.mediators.col(0).setZero();
  CHECK_THROWS_AS(goodness_of_fit_taxon(fit, z, 0), DataError);
  const GofReport r = goodness_of_fit(fit, z);
  CHECK_FALSE(r.taxa[0].error.empty());
}
