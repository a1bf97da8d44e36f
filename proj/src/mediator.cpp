#include "zimed/mediator.hpp"
#include "zimed/error.hpp"
#include "zimed/optimize.hpp"
#include "zimed/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace zimed {

namespace {

constexpr double z_limit = 6.0;
constexpr double log_sigma_floor = -12.0;

struct Bounds {
  double lo, hi;
};

Bounds bounds_for(int k, int p, int r2) {
  if (k == layout::sigma(p, r2))
    return {log_sigma_floor, 2.0};
  if (k < p)
    return {-20.0, 20.0}; // beta_z0
  if (k < 2 * p)
    return {-10.0, 20.0}; // beta_l0
  if (k < 3 * p)
    return {-50.0, 50.0}; // beta_0
  return {-20.0, 20.0};
}

} // namespace

ThetaVector clamp_to_bounds(const ThetaVector &theta) {
  const int p = theta.p(), r2 = theta.r2();
  Eigen::VectorXd v = pack_theta(theta);
  for (int k = 0; k < v.size(); ++k) {
    if (k == layout::sigma(p, r2)) {
      v(k) = std::min(std::abs(v(k)), std::exp(2.0));
      continue;
    }
    const Bounds b = bounds_for(k, p, r2);
    v(k) = std::clamp(v(k), b.lo, b.hi);
  }
  return unpack_theta(v, p, r2);
}

std::vector<TaxonShape> taxon_shapes(Family family, const ThetaVector &theta) {
  std::vector<TaxonShape> shapes(theta.p());
  for (int j = 0; j < theta.p(); ++j)
    shapes[j] = TaxonShape::make(family, theta.beta_z0(j), theta.beta_l0(j));
  return shapes;
}

double linear_predictor(const ThetaVector &theta, const Dataset &data, int i,
                        int j, int exposure) {
  double eta = theta.beta_0(j) + theta.beta_1(j) * exposure +
               std::log(data.offset(i));
  for (int k = 0; k < theta.r2(); ++k)
    eta += theta.beta_2(j, k) * data.c2(i, k);
  return eta;
}

std::vector<bool> free_parameters(Family family, int p, int r2) {
  std::vector<bool> mask(ThetaVector::packed_size(p, r2), true);
  for (int j = 0; j < p; ++j) {
    mask[layout::z0(p, j)] = zero_inflated(family);
    mask[layout::l0(p, j)] = negative_binomial(family);
  }
  return mask;
}

struct MarginalLikelihood::Prepared {
  const ThetaVector *theta;
  std::vector<TaxonShape> shapes;
  Eigen::MatrixXd eta; // n x p
  std::vector<CountConstants> cc; // row-major n x p
};

MarginalLikelihood::MarginalLikelihood(const Dataset &data, Family family,
                                       int quad_nodes)
    : data_(&data), family_(family), quad_nodes_(quad_nodes) {
  if (quad_nodes < 5)
    throw UsageError("BadQuadrature", "quad_nodes must be >= 5");
  log_offset_ = data.offset.array().log().matrix();
}

MarginalLikelihood::Prepared
MarginalLikelihood::prepare(const ThetaVector &theta) const {
  const Dataset &d = *data_;
  if (theta.p() != d.p() || theta.r2() != d.r2())
    throw DataError("LengthMismatch", "theta dimensions do not match data");
  Prepared prep;
  prep.theta = &theta;
  prep.shapes = taxon_shapes(family_, theta);
  const int n = d.n(), p = d.p();
  prep.eta.resize(n, p);
  prep.cc.resize(static_cast<std::size_t>(n) * p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      double eta = theta.beta_0(j) + theta.beta_1(j) * d.exposure(i) +
                   log_offset_(i);
      for (int k = 0; k < d.r2(); ++k)
        eta += theta.beta_2(j, k) * d.c2(i, k);
      prep.eta(i, j) = eta;
      prep.cc[static_cast<std::size_t>(i) * p + j] =
          count_constants(d.mediators(i, j), prep.shapes[j], true);
    }
  }
  return prep;
}

std::vector<MarginalLikelihood::Mode>
MarginalLikelihood::posterior_modes(const ThetaVector &theta,
                                    double tol) const {
  const Prepared prep = prepare(theta);
  std::vector<Mode> modes(data_->n());
  for (int i = 0; i < data_->n(); ++i)
    modes[i] = mode_for(prep, i, tol);
  return modes;
}

MarginalLikelihood::Mode MarginalLikelihood::mode_for(const Prepared &prep,
                                                      int i, double tol) const {
  const int p = data_->p();
  const double sigma = prep.theta->sigma_delta;
  Mode mode;
  if (sigma == 0.0)
    return mode;
  auto eval = [&](double z, double &f, double &f1, double &f2) {
    f = -0.5 * z * z;
    f1 = -z;
    f2 = -1.0;
    for (int j = 0; j < p; ++j) {
      const auto d = log_pmf_derivs(data_->mediators(i, j),
                                    prep.eta(i, j) + sigma * z, prep.shapes[j],
                                    prep.cc[static_cast<std::size_t>(i) * p + j]);
      f += d.value;
      f1 += sigma * d.d_u;
      f2 += sigma * sigma * d.d_uu;
    }
  };
  double z = 0.0, f, f1, f2;
  eval(z, f, f1, f2);
  for (int it = 0; it < 100; ++it) {
    double step = f2 < -1e-12 ? -f1 / f2 : f1;
    step = std::clamp(step, -2.0, 2.0);
    if (std::abs(step) < tol)
      break;
    double zn = 0.0, fn = 0.0, f1n = 0.0, f2n = 0.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      zn = std::clamp(z + step, -z_limit, z_limit);
      eval(zn, fn, f1n, f2n);
      if (fn >= f - 1e-14 * std::abs(f)) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved)
      break;
    const double dz = zn - z;
    z = zn;
    f = fn;
    f1 = f1n;
    f2 = f2n;
    if (std::abs(dz) < tol)
      break;
  }
  mode.z = z;
  mode.curvature = -f2;
  return mode;
}

double MarginalLikelihood::subject(const Prepared &prep, int i,
                                   Eigen::VectorXd *grad) const {
  const Dataset &d = *data_;
  const ThetaVector &theta = *prep.theta;
  const int p = d.p();
  const double sigma = theta.sigma_delta;
  const auto *cc = &prep.cc[static_cast<std::size_t>(i) * p];

  if (sigma == 0.0 && grad == nullptr) {
    double acc = 0.0;
    for (int j = 0; j < p; ++j)
      acc += log_pmf(d.mediators(i, j), prep.eta(i, j), prep.shapes[j], cc[j]);
    return acc;
  }

  double zhat = 0.0, scale = 1.0;
  if (sigma != 0.0) {
    const Mode mode = mode_for(prep, i, 1e-10);
    zhat = mode.z;
    if (mode.curvature > 1e-8)
      scale = 1.0 / std::sqrt(mode.curvature);
  }
  const GaussHermite &gh = gauss_hermite(quad_nodes_);
  const int q = gh.size();
  thread_local std::vector<double> term, du, dl, dz;
  term.assign(q, 0.0);
  if (grad) {
    du.assign(static_cast<std::size_t>(q) * p, 0.0);
    dl.assign(static_cast<std::size_t>(q) * p, 0.0);
    dz.assign(static_cast<std::size_t>(q) * p, 0.0);
  }
  double tmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < q; ++k) {
    const double x = gh.nodes[k];
    const double z = zhat + std::numbers::sqrt2 * scale * x;
    double f = -0.5 * z * z;
    for (int j = 0; j < p; ++j) {
      const int m = d.mediators(i, j);
      const double u = prep.eta(i, j) + sigma * z;
      if (grad) {
        const auto lp = log_pmf_derivs(m, u, prep.shapes[j], cc[j]);
        f += lp.value;
        du[k * p + j] = lp.d_u;
        dl[k * p + j] = lp.d_lphi;
        dz[k * p + j] = lp.d_z0;
      } else {
        f += log_pmf(m, u, prep.shapes[j], cc[j]);
      }
    }
    term[k] = gh.log_weights[k] + x * x + f;
    tmax = std::max(tmax, term[k]);
  }
  double sum = 0.0;
  for (int k = 0; k < q; ++k)
    sum += std::exp(term[k] - tmax);
  const double value =
      std::log(scale) - 0.5 * std::log(std::numbers::pi) + tmax + std::log(sum);

  if (grad) {
    Eigen::VectorXd &g = *grad;
    const int r2 = d.r2();
    double g_sigma = 0.0;
    for (int k = 0; k < q; ++k) {
      const double w = std::exp(term[k] - tmax) / sum;
      const double z = zhat + std::numbers::sqrt2 * scale * gh.nodes[k];
      for (int j = 0; j < p; ++j) {
        const double wu = w * du[k * p + j];
        g(layout::b0(p, j)) += wu;
        g(layout::b1(p, j)) += wu * d.exposure(i);
        for (int c = 0; c < r2; ++c)
          g(layout::b2(p, j, c)) += wu * d.c2(i, c);
        g(layout::z0(p, j)) += w * dz[k * p + j];
        g(layout::l0(p, j)) += w * dl[k * p + j];
        g_sigma += wu * z;
      }
    }
    g(layout::sigma(p, r2)) += g_sigma;
  }
  return value;
}

double MarginalLikelihood::value(const ThetaVector &theta) const {
  const Prepared prep = prepare(theta);
  double acc = 0.0;
  for (int i = 0; i < data_->n(); ++i)
    acc += subject(prep, i, nullptr);
  return acc;
}

double MarginalLikelihood::value_and_gradient(const ThetaVector &theta,
                                              Eigen::VectorXd &grad) const {
  const Prepared prep = prepare(theta);
  grad = Eigen::VectorXd::Zero(theta.size());
  double acc = 0.0;
  for (int i = 0; i < data_->n(); ++i)
    acc += subject(prep, i, &grad);
  const int p = theta.p();
  for (int j = 0; j < p; ++j) {
    if (!zero_inflated(family_))
      grad(layout::z0(p, j)) = 0.0;
    if (!negative_binomial(family_))
      grad(layout::l0(p, j)) = 0.0;
  }
  return acc;
}

double log_marginal_likelihood(const ThetaVector &theta, const Dataset &data,
                               Family family, int quad_nodes) {
  return MarginalLikelihood(data, family, quad_nodes).value(theta);
}

namespace {

// Poisson GLM for one taxon (IRLS), used for starting values.
Eigen::VectorXd poisson_start(const Dataset &d, int j) {
  const int n = d.n(), r2 = d.r2();
  const int k = 2 + r2;
  Eigen::MatrixXd x(n, k);
  x.col(0).setOnes();
  x.col(1) = d.exposure.cast<double>();
  if (r2 > 0)
    x.rightCols(r2) = d.c2;
  const Eigen::VectorXd y = d.mediators.col(j).cast<double>();
  const Eigen::VectorXd lz = d.offset.array().log().matrix();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  const double total = y.sum();
  if (total == 0.0) {
    beta(0) = -10.0 - lz.mean();
    return beta;
  }
  beta(0) = std::log(total / d.offset.sum());
  for (int it = 0; it < 25; ++it) {
    const Eigen::VectorXd eta = x * beta + lz;
    const Eigen::VectorXd mu = eta.array().min(30.0).exp().matrix();
    const Eigen::MatrixXd info = x.transpose() * mu.asDiagonal() * x;
    const Eigen::VectorXd score = x.transpose() * (y - mu);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info + 1e-8 * Eigen::MatrixXd::Identity(k, k));
    Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite())
      break;
    const double mx = step.lpNorm<Eigen::Infinity>();
    if (mx > 2.0)
      step *= 2.0 / mx;
    beta += step;
    if (mx < 1e-8)
      break;
  }
  for (int c = 1; c < k; ++c)
    beta(c) = std::clamp(beta(c), -5.0, 5.0);
  return beta;
}

ThetaVector default_start(const Dataset &d, Family family) {
  const int p = d.p(), r2 = d.r2();
  ThetaVector t = ThetaVector::zeros(p, r2);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd b = poisson_start(d, j);
    t.beta_0(j) = b(0);
    t.beta_1(j) = b(1);
    for (int c = 0; c < r2; ++c)
      t.beta_2(j, c) = b(2 + c);
    if (zero_inflated(family)) {
      // Excess zeros over a unit-dispersion count law.
      const double phi0 = negative_binomial(family) ? 1.0 : INFINITY;
      double expected_zero = 0.0;
      int zeros = 0;
      for (int i = 0; i < d.n(); ++i) {
        const double lam =
            std::exp(std::min(30.0, linear_predictor(t, d, i, j, d.exposure(i))));
        expected_zero += std::isinf(phi0) ? std::exp(-lam)
                                          : std::pow(1.0 + lam / phi0, -phi0);
        zeros += d.mediators(i, j) == 0;
      }
      const double excess =
          std::clamp((zeros - expected_zero) / d.n(), 0.02, 0.9);
      t.beta_z0(j) = std::log(excess / (1.0 - excess));
      t.beta_0(j) -= std::log1p(-excess);
    }
  }
  t.sigma_delta = 0.3;
  return t;
}

struct Packing {
  int p, r2;
  std::vector<int> index; // free slot -> packed index
  int sigma_slot = -1;

  Packing(Family f, int p_, int r2_) : p(p_), r2(r2_) {
    const auto mask = free_parameters(f, p, r2);
    for (int k = 0; k < static_cast<int>(mask.size()); ++k)
      if (mask[k]) {
        if (k == layout::sigma(p, r2))
          sigma_slot = static_cast<int>(index.size());
        index.push_back(k);
      }
  }

  Eigen::VectorXd to_free(const ThetaVector &t) const {
    const Eigen::VectorXd v = pack_theta(t);
    Eigen::VectorXd x(index.size());
    for (std::size_t s = 0; s < index.size(); ++s)
      x(s) = v(index[s]);
    x(sigma_slot) = std::log(std::max(std::abs(t.sigma_delta),
                                      std::exp(log_sigma_floor)));
    return x;
  }

  ThetaVector from_free(const Eigen::VectorXd &x, const ThetaVector &base) const {
    Eigen::VectorXd v = pack_theta(base);
    for (std::size_t s = 0; s < index.size(); ++s)
      v(index[s]) = x(s);
    v(layout::sigma(p, r2)) = std::exp(x(sigma_slot));
    return unpack_theta(v, p, r2);
  }

  void bounds(Eigen::VectorXd &lo, Eigen::VectorXd &hi) const {
    lo.resize(index.size());
    hi.resize(index.size());
    for (std::size_t s = 0; s < index.size(); ++s) {
      const Bounds b = bounds_for(index[s], p, r2);
      lo(s) = b.lo;
      hi(s) = b.hi;
    }
  }
};

// Inverse of a negative Hessian; pseudo-inverse with a warning when it is not
// positive definite.
Eigen::MatrixXd invert_information(const Eigen::MatrixXd &neg,
                                   std::vector<std::string> &warnings) {
  const int m = static_cast<int>(neg.rows());
  Eigen::MatrixXd cov_free;
  Eigen::LLT<Eigen::MatrixXd> llt(neg);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    cov_free = llt.solve(Eigen::MatrixXd::Identity(m, m));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
    const auto &ev = es.eigenvalues();
    ok = cov_free.allFinite() && ev(0) > 1e-12 * ev(m - 1);
  }
  if (!ok) {
    warnings.push_back("SingularHessian: pseudo-inverse used");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
    const auto &ev = es.eigenvalues();
    const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(m);
    for (int a = 0; a < m; ++a)
      if (ev(a) > 1e-12 * top)
        inv(a) = 1.0 / ev(a);
    cov_free = es.eigenvectors() * inv.asDiagonal() *
               es.eigenvectors().transpose();
  }
  return 0.5 * (cov_free + cov_free.transpose());
}

} // namespace

Eigen::MatrixXd information_covariance(const MarginalLikelihood &lik,
                                       const ThetaVector &theta,
                                       const std::vector<bool> &free_mask,
                                       std::vector<std::string> &warnings) {
  const int p = theta.p(), r2 = theta.r2();
  const int big_p = theta.size();
  const Eigen::VectorXd v0 = pack_theta(theta);

  std::vector<int> idx;
  for (int k = 0; k < big_p; ++k) {
    if (!free_mask[k])
      continue;
    const Bounds b = bounds_for(k, p, r2);
    if (k != layout::sigma(p, r2) &&
        (v0(k) <= b.lo + 1e-6 || v0(k) >= b.hi - 1e-6)) {
      warnings.push_back("BoundaryParameter: packed index " +
                         std::to_string(k) + " held fixed at its bound");
      continue;
    }
    idx.push_back(k);
  }
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd hess(m, m);
  Eigen::VectorXd gp, gm;
  for (int a = 0; a < m; ++a) {
    const int k = idx[a];
    const double h = 1e-4 * std::max(1.0, std::abs(v0(k)));
    Eigen::VectorXd vp = v0, vm = v0;
    vp(k) += h;
    vm(k) -= h;
    lik.value_and_gradient(unpack_theta(vp, p, r2), gp);
    lik.value_and_gradient(unpack_theta(vm, p, r2), gm);
    for (int b = 0; b < m; ++b)
      hess(b, a) = (gp(idx[b]) - gm(idx[b])) / (2.0 * h);
  }
  const Eigen::MatrixXd neg_full = -0.5 * (hess + hess.transpose());

  // Invert on the kept set. A parameter whose standard error exceeds a quarter
  // of its box is not identified by the data; it is held fixed (worst first)
  // and the rest re-inverted conditionally on it.
  std::vector<int> keep(m);
  for (int a = 0; a < m; ++a)
    keep[a] = a;
  Eigen::MatrixXd cov_free;
  for (;;) {
    const int mk = static_cast<int>(keep.size());
    Eigen::MatrixXd neg(mk, mk);
    for (int a = 0; a < mk; ++a)
      for (int b = 0; b < mk; ++b)
        neg(a, b) = neg_full(keep[a], keep[b]);
    cov_free = invert_information(neg, warnings);
    int worst = -1;
    double worst_ratio = 1.0;
    for (int a = 0; a < mk; ++a) {
      const int k = idx[keep[a]];
      const Bounds b = bounds_for(k, p, r2);
      const double width = k == layout::sigma(p, r2) ? std::exp(b.hi) : b.hi - b.lo;
      const double ratio = std::sqrt(std::max(cov_free(a, a), 0.0)) / (0.25 * width);
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst = a;
      }
    }
    if (worst < 0)
      break;
    warnings.push_back("WeaklyIdentified: packed index " +
                       std::to_string(idx[keep[worst]]) + " held fixed");
    keep.erase(keep.begin() + worst);
    if (keep.empty()) {
      cov_free.resize(0, 0);
      break;
    }
  }
  std::vector<int> kept_idx;
  for (int a : keep)
    kept_idx.push_back(idx[a]);
  idx = kept_idx;
  const int mk = static_cast<int>(idx.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(big_p, big_p);
  for (int a = 0; a < mk; ++a)
    for (int b = 0; b < mk; ++b)
      cov(idx[a], idx[b]) = cov_free(a, b);
  return cov;
}

MediatorFit fit_mediator_model(const Dataset &data, Family family,
                               const FitOptions &opts) {
  const int p = data.p(), r2 = data.r2();
  const MarginalLikelihood lik(data, family, opts.quad_nodes);
  const Packing pack(family, p, r2);
  Eigen::VectorXd lo, hi;
  pack.bounds(lo, hi);

  const ThetaVector base = opts.start ? *opts.start : default_start(data, family);
  const int n_subjects = data.n();
  const Objective objective = [&](const Eigen::VectorXd &x,
                                  Eigen::VectorXd *g) -> double {
    const ThetaVector t = pack.from_free(x, base);
    if (!g)
      return -lik.value(t) / n_subjects;
    Eigen::VectorXd full;
    const double v = lik.value_and_gradient(t, full);
    g->resize(x.size());
    for (std::size_t s = 0; s < pack.index.size(); ++s)
      (*g)(s) = -full(pack.index[s]) / n_subjects;
    (*g)(pack.sigma_slot) *= t.sigma_delta; // d/d log sigma
    return -v / n_subjects;
  };

  // Objective is per subject; with floor 1/n the optimizer's test is
  // |grad loglik|_inf < tol (1 + |loglik|).
  OptimOptions oo;
  oo.max_iter = opts.max_iter;
  oo.tol = opts.tol;
  oo.floor = 1.0 / n_subjects;
  auto converged = [&](const OptimResult &r) {
    const Eigen::VectorXd pg = projected_gradient(r.x, r.grad, lo, hi);
    const double ll = -r.value * n_subjects;
    return std::isfinite(ll) && pg.lpNorm<Eigen::Infinity>() * n_subjects <
                                    opts.tol * (1.0 + std::abs(ll));
  };
  auto tuned = [&](const Eigen::VectorXd &x0) {
    return minimize_bfgs(objective, x0, lo, hi, oo);
  };

  Eigen::VectorXd x0 = pack.to_free(base);
  OptimResult best = tuned(x0);
  int total_iter = best.iterations;
  if (!converged(best)) {
    Rng rng = make_stream(0x2545f4914f6cdd1dull, static_cast<std::uint64_t>(p),
                          stream_tag::multistart);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (int r = 0; r < opts.restarts; ++r) {
      Eigen::VectorXd xs = x0;
      for (Eigen::Index k = 0; k < xs.size(); ++k)
        xs(k) = std::clamp(xs(k) + jitter(rng), lo(k), hi(k));
      OptimResult cand = tuned(xs);
      total_iter += cand.iterations;
      const bool c_ok = converged(cand), b_ok = converged(best);
      if ((c_ok && !b_ok) || (c_ok == b_ok && cand.value < best.value))
        best = cand;
      if (converged(best))
        break;
    }
  }

  MediatorFit fit;
  fit.family = family;
  fit.theta_hat = pack.from_free(best.x, base);
  fit.converged = converged(best);
  fit.iterations = total_iter;
  fit.free_mask = free_parameters(family, p, r2);
  fit.n_free = free_parameter_count(family, p, r2);
  if (!fit.converged) {
    if (opts.throw_on_failure)
      throw ConvergenceError("NonConvergence",
                             "mediator model (" + to_string(family) +
                                 ") did not converge in " +
                                 std::to_string(opts.max_iter) + " iterations");
    fit.warnings.push_back("NonConvergence");
  }
  // Report sigma exactly 0 when pinned at the floor.
  if (std::log(fit.theta_hat.sigma_delta) <= log_sigma_floor + 1e-9)
    fit.theta_hat.sigma_delta = 0.0;
  for (int j = 0; j < p; ++j) {
    if (!zero_inflated(family))
      fit.theta_hat.beta_z0(j) = 0.0;
    if (!negative_binomial(family))
      fit.theta_hat.beta_l0(j) = 0.0;
  }
  fit.log_lik = lik.value(fit.theta_hat);
  fit.aic = 2.0 * fit.n_free - 2.0 * fit.log_lik;
  if (opts.covariance)
    fit.cov_star =
        information_covariance(lik, fit.theta_hat, fit.free_mask, fit.warnings);
  fit.delta_hat = empirical_bayes_effects(fit, data);
  return fit;
}

Eigen::VectorXd empirical_bayes_effects(const MediatorFit &fit,
                                        const Dataset &data) {
  const double sigma = fit.theta_hat.sigma_delta;
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(data.n());
  if (sigma == 0.0)
    return delta;
  const MarginalLikelihood lik(data, fit.family, 15);
  // Newton in z = delta / sigma; tolerance 1e-8 on the delta scale.
  const auto modes = lik.posterior_modes(fit.theta_hat, 1e-8 / sigma);
  for (int i = 0; i < data.n(); ++i)
    delta(i) = sigma * modes[i].z;
  return delta;
}

std::vector<ModelRank> model_selection(const Dataset &data,
                                       const std::vector<Family> &families,
                                       const FitOptions &opts) {
  if (families.size() < 2)
    throw UsageError("TooFewFamilies", "model selection needs >= 2 families");
  std::vector<ModelRank> ranks;
  FitOptions o = opts;
  o.covariance = false;
  for (const Family f : families) {
    ModelRank r;
    r.family = f;
    r.n_params = free_parameter_count(f, data.p(), data.r2());
    try {
      const MediatorFit fit = fit_mediator_model(data, f, o);
      r.aic = fit.aic;
      r.log_lik = fit.log_lik;
      r.ok = true;
    } catch (const Error &e) {
      r.error = e.what();
    }
    ranks.push_back(r);
  }
  std::stable_sort(ranks.begin(), ranks.end(),
                   [](const ModelRank &a, const ModelRank &b) {
                     if (a.ok != b.ok)
                       return a.ok;
                     if (!a.ok)
                       return false;
                     if (a.aic != b.aic)
                       return a.aic < b.aic;
                     return a.n_params < b.n_params;
                   });
  if (!ranks.front().ok) {
    std::string msg = "no family converged:";
    for (const auto &r : ranks)
      msg += " [" + to_string(r.family) + ": " + r.error + "]";
    throw ConvergenceError("NonConvergence", msg);
  }
  return ranks;
}

Dataset simulate_mediators(const Dataset &data, Family family,
                           const ThetaVector &theta, Rng &rng) {
  Dataset out = data;
  const auto shapes = taxon_shapes(family, theta);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < data.n(); ++i) {
    const double delta = theta.sigma_delta * normal(rng);
    for (int j = 0; j < data.p(); ++j) {
      const double u =
          linear_predictor(theta, data, i, j, data.exposure(i)) + delta;
      out.mediators(i, j) = sample_count(u, shapes[j], rng);
    }
  }
  return out;
}

} // namespace zimed
