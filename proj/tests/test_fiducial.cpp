#include "support.hpp"

#include "zimed/error.hpp"
#include "zimed/fiducial.hpp"
#include "zimed/mediator.hpp"
#include "zimed/pipeline.hpp"

#include <doctest.h>

using namespace zimed;

TEST_CASE("wishart factor shape and moments") {
  Rng rng(1);
  const int P = 4, N = 200, draws = 4000;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(P, P);
  double off = 0.0;
  for (int k = 0; k < draws; ++k) {
    const Eigen::MatrixXd u = sample_wishart_factor(P, N, rng);
    CHECK(u.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero());
    for (int i = 0; i < P; ++i)
      REQUIRE(u(i, i) > 0.0);
    off += u(2, 0);
    mean += u * u.transpose() / N;
  }
  mean /= draws;
  CHECK((mean - Eigen::MatrixXd::Identity(P, P)).cwiseAbs().maxCoeff() < 0.05);
  CHECK(std::abs(off / draws) < 0.05);
}

TEST_CASE("scalar wishart is a scaled chi-square") {
  Rng rng(2);
  const int N = 50, draws = 20000;
  double s = 0, s2 = 0;
  for (int k = 0; k < draws; ++k) {
    const double v = std::pow(sample_wishart_factor(1, N, rng)(0, 0), 2) / N;
    s += v;
    s2 += v * v;
  }
  const double mean = s / draws, var = s2 / draws - mean * mean;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
  CHECK(var == doctest::Approx(2.0 / N).epsilon(0.06));
}

TEST_CASE("too few degrees of freedom") {
  Rng rng(3);
  CHECK_THROWS_AS(sample_wishart_factor(5, 7, rng), UsageError);
  CHECK_NOTHROW(sample_wishart_factor(5, 8, rng));
}

TEST_CASE("zero noise returns the estimate") {
  Eigen::VectorXd est(3);
  est << 1.0, -2.0, 0.5;
  Eigen::MatrixXd s(3, 3);
  s << 1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5;
  const FiducialSampler f(est, s, 100);
  Rng rng(4);
  const Eigen::MatrixXd u = sample_wishart_factor(3, 100, rng);
  CHECK(f.draw(u, Eigen::VectorXd::Zero(3)) == est);
}

TEST_CASE("held-fixed parameters never move") {
  Eigen::VectorXd est(3);
  est << 1.0, 5.0, 0.5;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  s(0, 0) = 1.0;
  s(2, 2) = 0.3;
  const FiducialSampler f(est, s, 100);
  CHECK(f.active() == 2);
  Rng rng(5);
  for (int k = 0; k < 20; ++k)
    CHECK(f.draw(rng)(1) == 5.0);
}

TEST_CASE("draw covariance approximates the estimate covariance") {
  Eigen::VectorXd est = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4);
  const Eigen::MatrixXd s = a * a.transpose() / 4 + 0.1 * Eigen::MatrixXd::Identity(4, 4);
  const FiducialSampler f(est, s, 600);
  Rng rng(6);
  const int K = 10000;
  std::vector<Eigen::VectorXd> draws;
  for (int k = 0; k < K; ++k)
    draws.push_back(f.draw(rng));
  const Eigen::MatrixXd c = covariance_of(draws, K - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  CHECK(eigen_distance(s, c, EigenNorm::L2) <
        0.2 * es.eigenvalues().norm());
}

TEST_CASE("covariance divisor and eigen distance") {
  std::vector<Eigen::VectorXd> xs;
  for (double v : {1.0, 2.0, 3.0, 10.0}) {
    Eigen::VectorXd x(1);
    x << v;
    xs.push_back(x);
  }
  // First N + 1 = 3 estimates with divisor N = 2.
  CHECK(covariance_of(xs, 2)(0, 0) == doctest::Approx(1.0));
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 3, 0, 0, 1;
  b << 1, 0, 0, 2;
  b << 2, 0, 0, 0.5; // eigenvalues (3, 1) vs (2, 0.5)
  CHECK(eigen_distance(a, b, EigenNorm::L1) == doctest::Approx(1.5));
  CHECK(eigen_distance(a, b, EigenNorm::L2) == doctest::Approx(std::sqrt(1.25)));
  CHECK(eigen_distance(a, a, EigenNorm::L2) == 0.0);
}

TEST_CASE("equivalence search picks the smallest N within tolerance") {
  Rng rng(7);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Eigen::VectorXd> est;
  for (int k = 0; k < 1001; ++k) {
    Eigen::VectorXd v(2);
    v << z(rng), 2.0 * z(rng);
    est.push_back(v);
  }
  const Eigen::MatrixXd s = covariance_of(est, 100);
  const EquivalenceCalibration c =
      equivalence_from_estimates(s, est, {100, 400, 1000}, 1e-12, EigenNorm::L2);
  CHECK(c.n_equiv == 100);
  CHECK(c.within_tolerance);
  CHECK(c.bootstrap_reps == 101);
  CHECK(c.search_trace.size() == 3);

  const EquivalenceCalibration far = equivalence_from_estimates(
      100.0 * s, est, {100, 400, 1000}, 1e-12, EigenNorm::L2);
  CHECK_FALSE(far.within_tolerance);
  CHECK_FALSE(far.warnings.empty());
  CHECK_THROWS_AS(equivalence_from_estimates(s, est, {400, 100}, 1e-3,
                                             EigenNorm::L2),
                  UsageError);
}

TEST_CASE("bootstrap covariance needs enough replicates") {
  const Dataset d = testing::small_dataset(80, 1, 8);
  const MediatorFit fit = fit_mediator_model(d, Family::ZINegBinomial);
  CHECK_THROWS_AS(bootstrap_covariance(d, fit, 0, 1), UsageError);
}

TEST_CASE("derived parameters") {
  ThetaVector t = ThetaVector::zeros(2, 1);
  t.beta_z0 << 0.0, -40.0;
  t.beta_l0 << std::log(3.0), 0.0;
  const auto [pi, phi] = fiducial_derived_params(t);
  CHECK(pi(0) == 0.5);
  CHECK(pi(1) < 1e-17);
  CHECK(phi(0) == doctest::Approx(3.0));
}

TEST_CASE("fiducial draws are reproducible and thread independent") {
  ScenarioConfig cfg;
  cfg.beta0 = {0.0};
  const Dataset d = generate_dataset(cfg, 9);
  const PipelineResult base = run_pipeline(d, PipelineOptions{});
  FiducialOptions fo;
  fo.k = 500;
  fo.seed = 99;
  fo.threads = 1;
  const FiducialDraws a = fiducial_nie_samples(d, base.mediator, base.exposure, fo);
  fo.threads = 3;
  const FiducialDraws b = fiducial_nie_samples(d, base.mediator, base.exposure, fo);
  CHECK(a.k == 500);
  CHECK(a.conditional == false);
  CHECK(a.nde_draws == b.nde_draws);
  CHECK(a.nie_draws == b.nie_draws);
  for (int k = 0; k < a.k; ++k)
    CHECK(a.sigma_delta_draws(k) >= 0.0);
  const auto iv = fiducial_intervals(a, 0.05);
  REQUIRE(iv.size() == 2);
  CHECK(iv[1].lower <= base.outcome.effects.nie(0));
  CHECK(iv[1].upper >= base.outcome.effects.nie(0));

  fo.k = 100;
  CHECK_THROWS_AS(fiducial_nie_samples(d, base.mediator, base.exposure, fo),
                  UsageError);
}
