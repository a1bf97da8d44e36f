#ifndef ZIMED_OPTIMIZE_HPP
#define ZIMED_OPTIMIZE_HPP

#include <Eigen/Dense>

#include <functional>

namespace zimed {

// f(x, grad) returns the objective and, when grad != nullptr, fills it.
using Objective = std::function<double(const Eigen::VectorXd &, Eigen::VectorXd *)>;

struct OptimOptions {
  // Converged when |projected gradient|_inf < tol (floor + |f|).
  double tol = 1e-6;
  int max_iter = 500;
  double floor = 1.0;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

// Box-constrained quasi-Newton (BFGS inverse-Hessian update with projection
// onto the box and an Armijo backtracking line search).
OptimResult minimize_bfgs(const Objective &f, Eigen::VectorXd x0,
                          const Eigen::VectorXd &lower,
                          const Eigen::VectorXd &upper,
                          const OptimOptions &opts = {});

// Gradient with components that would push x outside the box zeroed.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd &x,
                                   const Eigen::VectorXd &g,
                                   const Eigen::VectorXd &lower,
                                   const Eigen::VectorXd &upper);

} // namespace zimed

#endif
