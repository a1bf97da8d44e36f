#include "zimed/pipeline.hpp"

namespace zimed {

WeightTable weights_at(const Dataset &data, const ExpandedData &expanded,
                       const ExposureFit &exposure, const ThetaVector &theta,
                       const Eigen::VectorXd &delta_hat,
                       const PipelineOptions &opts) {
  WeightTable w =
      opts.delta == DeltaMode::Marginal
          ? compute_marginal_weights(expanded, opts.family, theta, exposure,
                                     data, opts.marginal_nodes)
          : compute_weights(expanded, opts.family, theta, exposure, delta_hat,
                            data);
  if (opts.truncation)
    truncate_weights(w, opts.truncation->first, opts.truncation->second);
  return w;
}

OutcomeFit outcome_at(const Dataset &data, const ExpandedData &expanded,
                      const ExposureFit &exposure, const ThetaVector &theta,
                      const Eigen::VectorXd &delta_hat,
                      const PipelineOptions &opts) {
  const WeightTable w =
      weights_at(data, expanded, exposure, theta, delta_hat, opts);
  return fit_outcome_wls(expanded, w, opts.wls);
}

PipelineResult run_pipeline(const Dataset &data, const PipelineOptions &opts) {
  const ExpandedData expanded(data, opts.p_max);
  PipelineResult r;
  r.exposure = fit_exposure_model(data);
  r.mediator = fit_mediator_model(data, opts.family, opts.fit);
  r.warnings = r.mediator.warnings;
  r.weights = weights_at(data, expanded, r.exposure, r.mediator.theta_hat,
                         r.mediator.delta_hat, opts);
  r.outcome = fit_outcome_wls(expanded, r.weights, opts.wls);
  r.outcome.effects.conditional_on_delta = opts.delta == DeltaMode::Conditional;
  return r;
}

} // namespace zimed
