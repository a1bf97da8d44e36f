#include "zimed/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace zimed {

Eigen::VectorXd projected_gradient(const Eigen::VectorXd &x,
                                   const Eigen::VectorXd &g,
                                   const Eigen::VectorXd &lower,
                                   const Eigen::VectorXd &upper) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if ((x(k) <= lower(k) && g(k) > 0.0) || (x(k) >= upper(k) && g(k) < 0.0))
      pg(k) = 0.0;
  }
  return pg;
}

OptimResult minimize_bfgs(const Objective &f, Eigen::VectorXd x0,
                          const Eigen::VectorXd &lower,
                          const Eigen::VectorXd &upper,
                          const OptimOptions &opts) {
  const Eigen::Index n = x0.size();
  auto clamp = [&](Eigen::VectorXd v) {
    return v.cwiseMax(lower).cwiseMin(upper).eval();
  };

  OptimResult res;
  res.x = clamp(std::move(x0));
  res.grad.resize(n);
  res.value = f(res.x, &res.grad);

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;
  Eigen::VectorXd g_new(n);
  int stalled = 0; // consecutive iterations with negligible decrease

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    const Eigen::VectorXd pg =
        projected_gradient(res.x, res.grad, lower, upper);
    if (!std::isfinite(res.value))
      break;
    if (pg.lpNorm<Eigen::Infinity>() < opts.tol * (opts.floor + std::abs(res.value))) {
      res.converged = true;
      return res;
    }

    // Search direction on the free (inactive) coordinates.
    Eigen::VectorXd d = -(h * pg);
    for (Eigen::Index k = 0; k < n; ++k)
      if (pg(k) == 0.0 && res.grad(k) != 0.0)
        d(k) = 0.0;
    double slope = res.grad.dot(d);
    if (!(slope < 0.0)) {
      h.setIdentity();
      fresh = true;
      d = -pg;
      slope = res.grad.dot(d);
    }
    double t = 1.0;
    if (fresh) {
      const double dn = d.lpNorm<Eigen::Infinity>();
      if (dn > 1.0)
        t = 1.0 / dn;
    }

    Eigen::VectorXd x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = clamp(res.x + t * d);
      f_new = f(x_new, &g_new);
      const double decrease = res.grad.dot(x_new - res.x);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      t *= (ls < 2 ? 0.5 : 0.2);
    }
    if (!accepted) {
      if (fresh)
        break; // steepest descent cannot make progress either
      h.setIdentity();
      fresh = true;
      continue;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.grad;
    const double sy = s.dot(y);
    stalled = res.value - f_new < 1e-10 * (1.0 + std::abs(res.value))
                  ? stalled + 1
                  : 0;
    res.x = x_new;
    res.value = f_new;
    res.grad = g_new;
    if (s.lpNorm<Eigen::Infinity>() == 0.0 || stalled >= 20)
      break; // creeping along a ridge, e.g. under separation
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        h *= sy / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      h += (rho * rho * y.dot(hy) + rho) * s * s.transpose() -
           rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  const Eigen::VectorXd pg = projected_gradient(res.x, res.grad, lower, upper);
  res.converged = std::isfinite(res.value) &&
                  pg.lpNorm<Eigen::Infinity>() <
                      opts.tol * (opts.floor + std::abs(res.value));
  return res;
}

} // namespace zimed
