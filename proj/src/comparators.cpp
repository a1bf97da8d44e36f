#include "zimed/comparators.hpp"

#include "zimed/error.hpp"
#include "zimed/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <optional>
#include <random>

namespace zimed {

namespace {

Eigen::VectorXd effect_vector(const OutcomeFit &of) {
  const int p = static_cast<int>(of.effects.nie.size());
  Eigen::VectorXd v(p + 1);
  v(0) = of.effects.nde;
  v.tail(p) = of.effects.nie;
  return v;
}

} // namespace

std::vector<IntervalSummary> delta_ci(const Dataset &data,
                                      const PipelineResult &base,
                                      const PipelineOptions &opts,
                                      double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw UsageError("BadAlpha", "alpha must lie in (0, 1)");
  const MediatorFit &mf = base.mediator;
  if (mf.cov_star.size() == 0)
    throw UsageError("NoCovariance", "mediator fit has no covariance");
  const int p = data.p(), r2 = data.r2();
  const ExpandedData expanded(data, opts.p_max);
  const Eigen::VectorXd v0 = pack_theta(mf.theta_hat);
  const Eigen::VectorXd e0 = effect_vector(base.outcome);
  const int m = static_cast<int>(e0.size());

  std::vector<int> idx;
  for (int k = 0; k < v0.size(); ++k)
    if (mf.cov_star(k, k) > 0.0)
      idx.push_back(k);
  const int a = static_cast<int>(idx.size());

  // Jacobian of the effects with respect to the active mediator parameters.
  Eigen::MatrixXd jac(m, a);
  for (int c = 0; c < a; ++c) {
    const int k = idx[c];
    const double h = 1e-4 * std::max(1.0, std::abs(v0(k)));
    Eigen::VectorXd vp = v0, vm = v0;
    vp(k) += h;
    vm(k) -= h;
    ThetaVector tp = unpack_theta(vp, p, r2), tm = unpack_theta(vm, p, r2);
    tp.sigma_delta = std::abs(tp.sigma_delta);
    tm.sigma_delta = std::abs(tm.sigma_delta);
    const Eigen::VectorXd ep = effect_vector(
        outcome_at(data, expanded, base.exposure, tp, mf.delta_hat, opts));
    const Eigen::VectorXd em = effect_vector(
        outcome_at(data, expanded, base.exposure, tm, mf.delta_hat, opts));
    jac.col(c) = (ep - em) / (2.0 * h);
  }
  if (!jac.allFinite())
    throw ConvergenceError("SingularGradient",
                           "effect gradient is not finite");
  Eigen::MatrixXd sa(a, a);
  for (int r = 0; r < a; ++r)
    for (int c = 0; c < a; ++c)
      sa(r, c) = mf.cov_star(idx[r], idx[c]);

  const Eigen::MatrixXd var_med = jac * sa * jac.transpose();
  const boost::math::normal_distribution<double> stdnorm;
  const double z = boost::math::quantile(stdnorm, 1.0 - alpha / 2.0);
  std::vector<IntervalSummary> out;
  for (int e = 0; e < m; ++e) {
    // WLS coefficient index of effect e: theta_0 at 1, theta_j at 1 + j.
    const double var = var_med(e, e) + base.outcome.cov(e + 1, e + 1);
    if (!std::isfinite(var) || var < 0.0)
      throw ConvergenceError("SingularGradient",
                             "delta-method variance is not finite");
    const double se = std::sqrt(var);
    IntervalSummary s;
    s.method = IntervalMethod::Delta;
    s.alpha = alpha;
    s.estimate = e0(e);
    s.lower = e0(e) - z * se;
    s.upper = e0(e) + z * se;
    s.width = s.upper - s.lower;
    out.push_back(s);
  }
  return out;
}

NpbResult npb_ci(const Dataset &data, const PipelineResult &base,
                 const PipelineOptions &opts, const NpbOptions &npb) {
  if (npb.reps < 200)
    throw UsageError("TooFewReplicates", "NPB needs at least 200 resamples");
  const int n = data.n();
  const Eigen::VectorXd e0 = effect_vector(base.outcome);
  const int m = static_cast<int>(e0.size());

  PipelineOptions po = opts;
  po.fit.covariance = false;
  po.fit.start = base.mediator.theta_hat;
  if (po.fit.start->sigma_delta == 0.0)
    po.fit.start->sigma_delta = 0.05;

  std::vector<std::optional<Eigen::VectorXd>> slots(npb.reps);
  parallel_for(npb.reps, npb.threads > 0 ? npb.threads : default_threads(),
               [&](int r) {
    std::vector<int> idx(n);
    if (npb.identity_resample) {
      for (int i = 0; i < n; ++i)
        idx[i] = i;
    } else {
      Rng rng = make_stream(npb.seed, static_cast<std::uint64_t>(r),
                            stream_tag::npb);
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int i = 0; i < n; ++i)
        idx[i] = pick(rng);
    }
    try {
      const Dataset boot = data.subset(idx);
      const PipelineResult res = run_pipeline(boot, po);
      const Eigen::VectorXd e = effect_vector(res.outcome);
      if (e.allFinite())
        slots[r] = e;
    } catch (const Error &) {
    }
  });

  NpbResult out;
  for (const auto &s : slots)
    out.effective += s ? 1 : 0;
  out.dropped = npb.reps - out.effective;
  if (2 * out.effective < npb.reps)
    throw ConvergenceError("TooManyFailures",
                           std::to_string(out.dropped) + " of " +
                               std::to_string(npb.reps) +
                               " bootstrap resamples failed");
  out.estimates.resize(out.effective, m);
  int row = 0;
  for (const auto &s : slots)
    if (s)
      out.estimates.row(row++) = s->transpose();
  for (int e = 0; e < m; ++e) {
    const Eigen::VectorXd c = out.estimates.col(e);
    const auto [lo, hi] = percentile_interval(
        std::vector<double>(c.data(), c.data() + c.size()), npb.alpha);
    IntervalSummary s;
    s.method = IntervalMethod::NPB;
    s.alpha = npb.alpha;
    s.estimate = e0(e);
    s.lower = lo;
    s.upper = hi;
    s.width = hi - lo;
    out.intervals.push_back(s);
  }
  return out;
}

} // namespace zimed
