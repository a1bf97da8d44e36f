#ifndef ZIMED_REPORT_HPP
#define ZIMED_REPORT_HPP

#include "zimed/data.hpp"
#include "zimed/fiducial.hpp"
#include "zimed/gof.hpp"
#include "zimed/intervals.hpp"
#include "zimed/simulation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace zimed {

inline constexpr const char *software_version = "0.3.0";

struct ReportMetadata {
  std::string family;
  int k_requested = 0;
  int k_effective = 0;
  int n_equiv = 0;
  bool n_equiv_calibrated = false;
  bool conditional = false;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int n = 0;
  int p = 0;
  double log_lik = 0.0;
  double aic = 0.0;
  std::vector<std::string> warnings;
};

// One row per effect: "NDE" first, then one per taxon.
struct MediationReport {
  std::vector<std::string> names;
  std::vector<IntervalSummary> fiducial;
  std::optional<std::vector<IntervalSummary>> delta;
  std::optional<std::vector<IntervalSummary>> npb;
  ReportMetadata meta;
};

std::string report_json(const MediationReport &r);
std::string report_csv(const MediationReport &r);
// report.json and report.csv in `dir`.
void write_report(const MediationReport &r, const std::string &dir);

// k, nde, nie_<taxon>...
void write_draws_csv(const FiducialDraws &d,
                     const std::vector<std::string> &taxa,
                     const std::string &path);

std::string calibration_json(const EquivalenceCalibration &c,
                             std::uint64_t seed);
void write_calibration(const EquivalenceCalibration &c, std::uint64_t seed,
                       const std::string &path);

void write_gof_csv(const GofReport &g, const std::string &path);

// Long format: one row per scenario x method x effect.
std::string scenario_results_csv(const std::vector<ScenarioResult> &results);
std::string scenario_results_json(const std::vector<ScenarioResult> &results);
void write_scenario_results(const std::vector<ScenarioResult> &results,
                            const std::string &dir);
// Column names of scenario_results.csv.
const std::vector<std::string> &scenario_results_columns();

struct TaxonSummary {
  std::string taxon;
  double zero_prop = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double q25 = 0.0, q50 = 0.0, q75 = 0.0, q90 = 0.0;
  int max = 0;
  double skewness = 0.0;
  bool degenerate = false; // constant counts: skewness reported as 0
};

struct SummaryStats {
  std::vector<TaxonSummary> taxa;
  std::vector<std::string> subject_id;
  Eigen::VectorXd depth; // row sums (+ unassigned reads when provided)
};

SummaryStats emit_summary_stats(const Dataset &data,
                                const std::optional<Eigen::VectorXd> &unassigned = {});
// summary.csv (per taxon) and depth.csv (per subject) in `dir`.
void write_summary_stats(const SummaryStats &s, const std::string &dir);

// Writes `text` to `path`, throwing IOError on failure.
void write_text(const std::string &path, const std::string &text);

} // namespace zimed

#endif
