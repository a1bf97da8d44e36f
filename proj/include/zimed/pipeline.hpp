#ifndef ZIMED_PIPELINE_HPP
#define ZIMED_PIPELINE_HPP

#include "zimed/exposure.hpp"
#include "zimed/mediator.hpp"
#include "zimed/natural_effects.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace zimed {

// How delta_i enters the mediation weights.
enum class DeltaMode {
  Conditional, // plug in the empirical Bayes delta_hat
  Marginal,    // integrate over N(0, sigma_delta^2)
};

struct PipelineOptions {
  Family family = Family::ZINegBinomial;
  FitOptions fit;
  WlsOptions wls;
  DeltaMode delta = DeltaMode::Conditional;
  int marginal_nodes = 9;
  std::optional<std::pair<double, double>> truncation; // percentile cap
  int p_max = default_max_mediators;
};

struct PipelineResult {
  ExposureFit exposure;
  MediatorFit mediator;
  WeightTable weights;
  OutcomeFit outcome;
  std::vector<std::string> warnings;
};

// Exposure fit, mediator fit, weights and WLS in one pass.
PipelineResult run_pipeline(const Dataset &data, const PipelineOptions &opts);

// Weights and WLS at a given mediator parameter vector, reusing the fits.
WeightTable weights_at(const Dataset &data, const ExpandedData &expanded,
                       const ExposureFit &exposure, const ThetaVector &theta,
                       const Eigen::VectorXd &delta_hat,
                       const PipelineOptions &opts);
OutcomeFit outcome_at(const Dataset &data, const ExpandedData &expanded,
                      const ExposureFit &exposure, const ThetaVector &theta,
                      const Eigen::VectorXd &delta_hat,
                      const PipelineOptions &opts);

} // namespace zimed

#endif
