#include "zimed/exposure.hpp"
#include "zimed/count_model.hpp"
#include "zimed/error.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace zimed {

ExposureFit fit_exposure_model(const Dataset &data) {
  const int n = data.n();
  const int k = data.r1() + 1;
  Eigen::MatrixXd x(n, k);
  x.col(0).setOnes();
  if (k > 1)
    x.rightCols(k - 1) = data.c1;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const auto &sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-10 * sv(0))
    throw DataError("Collinear", "exposure design [1, C1] is rank deficient");

  const Eigen::VectorXd a = data.exposure.cast<double>();
  constexpr double separation_bound = 30.0;
  ExposureFit fit;
  fit.alpha = Eigen::VectorXd::Zero(k);
  const double pbar = a.mean();
  fit.alpha(0) = std::log(pbar / (1.0 - pbar));

  Eigen::VectorXd prob(n);
  for (int it = 0; it < 100; ++it) {
    fit.iterations = it + 1;
    const Eigen::VectorXd eta = x * fit.alpha;
    for (int i = 0; i < n; ++i)
      prob(i) = expit(eta(i));
    const Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).matrix();
    const Eigen::VectorXd score = x.transpose() * (a - prob);
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite())
      throw DataError("Separation", "information matrix became singular");
    fit.alpha += step;
    if (fit.alpha.cwiseAbs().maxCoeff() > separation_bound)
      throw DataError("Separation",
                      "exposure coefficients diverge (perfect prediction)");
    if (step.lpNorm<Eigen::Infinity>() < 1e-10)
      break;
  }
  const Eigen::VectorXd eta = x * fit.alpha;
  fit.fitted_prob.resize(n);
  for (int i = 0; i < n; ++i)
    fit.fitted_prob(i) = expit(eta(i));
  fit.marginal_exposed = fit.fitted_prob.mean();
  return fit;
}

} // namespace zimed
