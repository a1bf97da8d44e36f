#include "zimed/quadrature.hpp"
#include "zimed/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace zimed {

namespace {

GaussHermite build_rule(int order) {
  if (order < 1)
    throw UsageError("BadQuadrature", "Gauss-Hermite order must be >= 1");
  // Jacobi matrix of the Hermite recurrence: off-diagonals sqrt(k/2).
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k)
    jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussHermite rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  rule.log_weights.resize(order);
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int k = 0; k < order; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    rule.nodes[k] = es.eigenvalues()(k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  // Symmetrize: the exact rule is symmetric about 0.
  for (int k = 0; k < order / 2; ++k) {
    const int m = order - 1 - k;
    const double x = 0.5 * (rule.nodes[m] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[m] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[m] = x;
    rule.weights[k] = rule.weights[m] = w;
  }
  if (order % 2 == 1)
    rule.nodes[order / 2] = 0.0;
  for (int k = 0; k < order; ++k)
    rule.log_weights[k] = std::log(rule.weights[k]);
  return rule;
}

std::mutex cache_mutex;

} // namespace

const GaussHermite &gauss_hermite(int order) {
  static std::map<int, std::unique_ptr<GaussHermite>> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto &slot = cache[order];
  if (!slot)
    slot = std::make_unique<GaussHermite>(build_rule(order));
  return *slot;
}

const NormalRule &normal_rule(int order) {
  static std::map<int, std::unique_ptr<NormalRule>> cache;
  const GaussHermite &gh = gauss_hermite(order);
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto &slot = cache[order];
  if (!slot) {
    auto r = std::make_unique<NormalRule>();
    for (int k = 0; k < gh.size(); ++k) {
      r->nodes.push_back(std::numbers::sqrt2 * gh.nodes[k]);
      r->weights.push_back(gh.weights[k] / std::sqrt(std::numbers::pi));
    }
    slot = std::move(r);
  }
  return *slot;
}

} // namespace zimed
