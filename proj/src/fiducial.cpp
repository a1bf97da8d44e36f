#include "zimed/fiducial.hpp"

#include "zimed/error.hpp"
#include "zimed/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace zimed {

Eigen::MatrixXd sample_wishart_factor(int P, int N, Rng &rng) {
  if (P < 1 || N <= P + 2)
    throw UsageError("DegreesOfFreedomTooSmall",
                     "Wishart factor needs N > P + 2 (P = " +
                         std::to_string(P) + ", N = " + std::to_string(N) + ")");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(P, P);
  for (int r = 0; r < P; ++r) {
    std::chi_squared_distribution<double> chi2(static_cast<double>(N - r));
    u(r, r) = std::sqrt(chi2(rng));
    for (int c = 0; c < r; ++c)
      u(r, c) = normal(rng);
  }
  return u;
}

FiducialSampler::FiducialSampler(const Eigen::VectorXd &est,
                                 const Eigen::MatrixXd &s, int N)
    : est_(est), n_(N) {
  if (s.rows() != est.size() || s.cols() != est.size())
    throw DataError("LengthMismatch", "covariance does not match estimate");
  for (Eigen::Index k = 0; k < est.size(); ++k)
    if (s(k, k) > 0.0)
      active_.push_back(static_cast<int>(k));
  const int a = active();
  if (a == 0) {
    t_.resize(0, 0);
    return;
  }
  if (N <= a + 2)
    throw UsageError("DegreesOfFreedomTooSmall",
                     "equivalence number " + std::to_string(N) +
                         " too small for " + std::to_string(a) +
                         " parameters");
  Eigen::MatrixXd sa(a, a);
  for (int r = 0; r < a; ++r)
    for (int c = 0; c < a; ++c)
      sa(r, c) = s(active_[r], active_[c]);
  sa = 0.5 * (sa + sa.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(N * sa);
  if (llt.info() != Eigen::Success) {
    llt.compute(N * (sa + 1e-10 * Eigen::MatrixXd::Identity(a, a)));
    if (llt.info() != Eigen::Success)
      throw ConvergenceError("CholeskyFailure",
                             "covariance is not positive definite");
  }
  t_ = llt.matrixL();
}

Eigen::VectorXd FiducialSampler::draw(const Eigen::MatrixXd &u,
                                      const Eigen::VectorXd &z) const {
  Eigen::VectorXd out = est_;
  if (active_.empty())
    return out;
  const Eigen::VectorXd x =
      u.triangularView<Eigen::Lower>().solve(z); // U^{-1} Z
  const Eigen::VectorXd bz = t_.triangularView<Eigen::Lower>() * x;
  for (int r = 0; r < active(); ++r)
    out(active_[r]) -= bz(r);
  return out;
}

Eigen::VectorXd FiducialSampler::draw(Rng &rng) const {
  if (active_.empty())
    return est_;
  const Eigen::MatrixXd u = sample_wishart_factor(active(), n_, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(active());
  for (int r = 0; r < active(); ++r)
    z(r) = normal(rng);
  return draw(u, z);
}

ThetaVector fiducial_theta_draw(const ThetaVector &theta_hat,
                                const Eigen::MatrixXd &s_star, int N,
                                Rng &rng) {
  const FiducialSampler sampler(pack_theta(theta_hat), s_star, N);
  ThetaVector t = unpack_theta(sampler.draw(rng), theta_hat.p(), theta_hat.r2());
  t.sigma_delta = std::abs(t.sigma_delta);
  return t;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
fiducial_derived_params(const ThetaVector &theta_tilde) {
  const int p = theta_tilde.p();
  Eigen::VectorXd pi(p), phi(p);
  for (int j = 0; j < p; ++j) {
    pi(j) = expit(theta_tilde.beta_z0(j));
    phi(j) = std::exp(theta_tilde.beta_l0(j));
  }
  return {pi, phi};
}

Eigen::MatrixXd covariance_of(const std::vector<Eigen::VectorXd> &estimates,
                              int N) {
  if (N < 1 || static_cast<int>(estimates.size()) < N + 1)
    throw UsageError("TooFewReplicates",
                     "need N + 1 = " + std::to_string(N + 1) +
                         " estimates, have " + std::to_string(estimates.size()));
  const Eigen::Index dim = estimates.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (int r = 0; r <= N; ++r)
    mean += estimates[r];
  mean /= static_cast<double>(N + 1);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
  for (int r = 0; r <= N; ++r) {
    const Eigen::VectorXd d = estimates[r] - mean;
    s.noalias() += d * d.transpose();
  }
  return s / static_cast<double>(N);
}

BootstrapCovariance bootstrap_covariance(const Dataset &data,
                                         const MediatorFit &fit, int n_reps,
                                         std::uint64_t seed, int threads) {
  if (n_reps < 50)
    throw UsageError("TooFewReplicates",
                     "parametric bootstrap needs n_reps >= 50");
  const int total = n_reps + 1;
  FitOptions fo;
  fo.covariance = false;
  fo.throw_on_failure = false;
  fo.start = fit.theta_hat;
  if (fo.start->sigma_delta == 0.0)
    fo.start->sigma_delta = 0.05;
  // Refits that fail to converge are replaced from further streams, up to
  // 2 * total attempts, so that the effective count reaches total when it can.
  BootstrapCovariance out;
  out.requested = total;
  int attempted = 0;
  while (static_cast<int>(out.estimates.size()) < total &&
         attempted < 2 * total) {
    const int batch = std::min(total - static_cast<int>(out.estimates.size()),
                               2 * total - attempted);
    std::vector<std::optional<Eigen::VectorXd>> slots(batch);
    parallel_for(batch, threads > 0 ? threads : default_threads(), [&](int b) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(attempted + b),
                            stream_tag::bootstrap_cov);
      const Dataset sim =
          simulate_mediators(data, fit.family, fit.theta_hat, rng);
      try {
        const MediatorFit refit = fit_mediator_model(sim, fit.family, fo);
        if (refit.converged)
          slots[b] = pack_theta(refit.theta_hat);
      } catch (const Error &) {
      }
    });
    attempted += batch;
    for (auto &s : slots) {
      if (s)
        out.estimates.push_back(std::move(*s));
      else
        ++out.dropped;
    }
  }
  const int eff = static_cast<int>(out.estimates.size());
  if (eff < 2)
    throw ConvergenceError("TooManyFailures",
                           "parametric bootstrap: no replicate converged");
  out.s_n = covariance_of(out.estimates, eff - 1);
  return out;
}

double eigen_distance(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b,
                      EigenNorm norm) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(0.5 * (a + a.transpose()),
                                                    Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(0.5 * (b + b.transpose()),
                                                    Eigen::EigenvaluesOnly);
  // Both ascending; the descending order pairs the same entries.
  const Eigen::VectorXd d = ea.eigenvalues() - eb.eigenvalues();
  return norm == EigenNorm::L1 ? d.lpNorm<1>() : d.norm();
}

namespace {

Eigen::MatrixXd active_block(const Eigen::MatrixXd &m,
                             const std::vector<int> &idx) {
  Eigen::MatrixXd out(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b)
      out(a, b) = m(idx[a], idx[b]);
  return out;
}

} // namespace

EquivalenceCalibration
equivalence_from_estimates(const Eigen::MatrixXd &s_star,
                           const std::vector<Eigen::VectorXd> &estimates,
                           const std::vector<int> &grid, double tol,
                           EigenNorm norm) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
    throw UsageError("BadGrid", "equivalence grid must be non-empty and "
                                "ascending");
  // Held-fixed parameters have zero rows in S* and are never drawn; compare
  // on the block the fiducial draws perturb.
  std::vector<int> active;
  for (Eigen::Index k = 0; k < s_star.rows(); ++k)
    if (s_star(k, k) > 0.0)
      active.push_back(static_cast<int>(k));
  if (active.empty())
    for (Eigen::Index k = 0; k < s_star.rows(); ++k)
      active.push_back(static_cast<int>(k));
  EquivalenceCalibration cal;
  double best = INFINITY;
  for (const int n : grid) {
    if (static_cast<int>(estimates.size()) < n + 1) {
      cal.warnings.push_back("candidate N = " + std::to_string(n) +
                             " skipped: only " +
                             std::to_string(estimates.size()) +
                             " converged refits");
      continue;
    }
    const Eigen::MatrixXd s_n = covariance_of(estimates, n);
    const double d = eigen_distance(active_block(s_star, active),
                                    active_block(s_n, active), norm);
    cal.search_trace.emplace_back(n, d);
    if (d <= tol && !cal.within_tolerance) {
      cal.within_tolerance = true;
      cal.n_equiv = n;
      cal.distance = d;
    }
    if (!cal.within_tolerance && d < best) {
      best = d;
      cal.n_equiv = n;
      cal.distance = d;
    }
  }
  if (cal.search_trace.empty())
    throw ConvergenceError("TooManyFailures",
                           "no equivalence candidate could be evaluated");
  if (!cal.within_tolerance)
    cal.warnings.push_back("no candidate reached tolerance; using argmin N = " +
                           std::to_string(cal.n_equiv));
  cal.bootstrap_reps = cal.n_equiv + 1;
  return cal;
}

EquivalenceCalibration equivalence_number(const Dataset &data,
                                          const MediatorFit &fit,
                                          const std::vector<int> &grid,
                                          double tol, EigenNorm norm,
                                          std::uint64_t seed, int threads) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()))
    throw UsageError("BadGrid", "equivalence grid must be non-empty and "
                                "ascending");
  if (fit.cov_star.size() == 0)
    throw UsageError("NoCovariance", "fit has no information covariance");
  const BootstrapCovariance boot =
      bootstrap_covariance(data, fit, std::max(grid.back(), 50), seed, threads);
  EquivalenceCalibration cal =
      equivalence_from_estimates(fit.cov_star, boot.estimates, grid, tol, norm);
  if (boot.dropped > 0)
    cal.warnings.push_back(std::to_string(boot.dropped) +
                           " bootstrap refits dropped (non-convergence)");
  return cal;
}

FiducialDraws fiducial_nie_samples(const Dataset &data,
                                   const MediatorFit &med_fit,
                                   const ExposureFit &exp_fit,
                                   const FiducialOptions &opts) {
  if (opts.k < min_fiducial_draws)
    throw UsageError("TooFewDraws", "K must be at least " +
                                        std::to_string(min_fiducial_draws));
  if (med_fit.cov_star.size() == 0)
    throw UsageError("NoCovariance", "mediator fit has no covariance");
  const int p = data.p();
  const int q = p + 2;
  const int n_outcome = data.n() - q;
  const ExpandedData expanded(data);
  const FiducialSampler sampler(pack_theta(med_fit.theta_hat), med_fit.cov_star,
                                opts.n_equiv);

  PipelineOptions po;
  po.family = med_fit.family;
  po.wls = opts.wls;
  po.delta = opts.delta;
  po.marginal_nodes = opts.marginal_nodes;

  struct Slot {
    bool ok = false;
    double nde = 0.0;
    Eigen::VectorXd nie;
    double sigma = 0.0;
    std::string error;
  };
  std::vector<Slot> slots(opts.k);
  parallel_for(opts.k, opts.threads > 0 ? opts.threads : default_threads(),
               [&](int k) {
    Rng rng = make_stream(opts.seed, static_cast<std::uint64_t>(k),
                          stream_tag::fiducial);
    Slot &s = slots[k];
    const char *stage = "theta";
    try {
      const ThetaVector theta = clamp_to_bounds(
          unpack_theta(sampler.draw(rng), p, data.r2()));
      stage = "weights";
      const WeightTable w =
          weights_at(data, expanded, exp_fit, theta, med_fit.delta_hat, po);
      stage = "wls";
      const OutcomeFit of = fit_outcome_wls(expanded, w, po.wls);
      Eigen::VectorXd coef = of.effects.theta;
      if (opts.replicate_outcome) {
        stage = "outcome";
        coef = FiducialSampler(coef, of.cov, n_outcome).draw(rng);
      }
      s.nde = coef(1);
      s.nie = coef.segment(2, p);
      s.sigma = theta.sigma_delta;
      s.ok = s.nie.allFinite() && std::isfinite(s.nde);
      if (!s.ok)
        s.error = std::string(stage) + ": non-finite effect";
    } catch (const Error &e) {
      s.error = std::string(stage) + ": " + e.what();
    }
  });

  FiducialDraws out;
  out.requested = opts.k;
  out.conditional = opts.delta == DeltaMode::Conditional;
  int eff = 0;
  for (const auto &s : slots)
    eff += s.ok ? 1 : 0;
  out.k = eff;
  out.nde_draws.resize(eff);
  out.nie_draws.resize(eff, p);
  out.sigma_delta_draws.resize(eff);
  int r = 0;
  for (int k = 0; k < opts.k; ++k) {
    const Slot &s = slots[k];
    if (!s.ok) {
      out.dropped.push_back("draw " + std::to_string(k) + ": " + s.error);
      continue;
    }
    out.nde_draws(r) = s.nde;
    out.nie_draws.row(r) = s.nie.transpose();
    out.sigma_delta_draws(r) = s.sigma;
    ++r;
  }
  if (eff < 0.9 * opts.k)
    throw ConvergenceError("TooManyDroppedDraws",
                           std::to_string(opts.k - eff) + " of " +
                               std::to_string(opts.k) + " fiducial draws failed" +
                               (out.dropped.empty() ? std::string()
                                                    : "; first: " +
                                                          out.dropped.front()));
  return out;
}

std::vector<IntervalSummary> fiducial_intervals(const FiducialDraws &draws,
                                                double alpha) {
  std::vector<IntervalSummary> out;
  auto col = [](const Eigen::VectorXd &v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  out.push_back(fiducial_summary(col(draws.nde_draws), alpha));
  for (Eigen::Index j = 0; j < draws.nie_draws.cols(); ++j)
    out.push_back(
        fiducial_summary(col(draws.nie_draws.col(j).eval()), alpha));
  return out;
}

} // namespace zimed
