#ifndef ZIMED_EXPOSURE_HPP
#define ZIMED_EXPOSURE_HPP

#include "zimed/data.hpp"

#include <Eigen/Dense>

namespace zimed {

// Logistic model for the exposure given C1.
struct ExposureFit {
  Eigen::VectorXd alpha;        // intercept, then one slope per C1 column
  Eigen::VectorXd fitted_prob;  // P(A = 1 | C1_i)
  double marginal_exposed = 0.0; // P(A = 1), average of fitted_prob
  int iterations = 0;

  double marginal(int level) const {
    return level == 1 ? marginal_exposed : 1.0 - marginal_exposed;
  }
  // P(A = level | C1_i)
  double conditional(int i, int level) const {
    return level == 1 ? fitted_prob(i) : 1.0 - fitted_prob(i);
  }
};

// Maximum likelihood by Newton-Raphson. Throws DataError("Collinear") when
// [1, C1] is rank deficient (condition number > 1e10) and
// DataError("Separation") when a coefficient exceeds 30 in magnitude.
ExposureFit fit_exposure_model(const Dataset &data);

} // namespace zimed

#endif
