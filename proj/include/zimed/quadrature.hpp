#ifndef ZIMED_QUADRATURE_HPP
#define ZIMED_QUADRATURE_HPP

#include <vector>

namespace zimed {

// Physicists' Gauss-Hermite rule: int exp(-x^2) f(x) dx ~ sum w_k f(x_k).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> log_weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

// Golub-Welsch; nodes ascending. Cached per order, thread safe.
const GaussHermite &gauss_hermite(int order);

// Rule for E[f(Z)] with Z ~ N(0, 1): nodes sqrt(2) x_k, weights w_k / sqrt(pi).
struct NormalRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const NormalRule &normal_rule(int order);

} // namespace zimed

#endif
