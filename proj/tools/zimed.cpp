// zimed: mediation analysis for zero-inflated count mediators.

#include "zimed/comparators.hpp"
#include "zimed/error.hpp"
#include "zimed/fiducial.hpp"
#include "zimed/gof.hpp"
#include "zimed/parallel.hpp"
#include "zimed/pipeline.hpp"
#include "zimed/report.hpp"
#include "zimed/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

using namespace zimed;

namespace {

struct SchemaFlags {
  std::string id = "id";
  std::string exposure = "exposure";
  std::vector<std::string> c1{"c1"};
  std::vector<std::string> c2{"c2"};
  std::vector<std::string> c3;
  std::vector<std::string> mediators;
  std::string mediator_prefix = "taxon";
  std::string offset = "offset";
  std::string outcome = "outcome";

  void add(CLI::App *cmd) {
    cmd->add_option("--id-col", id, "Subject id column")->capture_default_str();
    cmd->add_option("--exposure-col", exposure, "Binary exposure column")
        ->capture_default_str();
    cmd->add_option("--c1", c1, "Exposure-outcome confounder columns")
        ->capture_default_str();
    cmd->add_option("--c2", c2, "Exposure-mediator confounder columns")
        ->capture_default_str();
    cmd->add_option("--c3", c3, "Outcome covariate columns");
    cmd->add_option("--mediators", mediators, "Mediator columns");
    cmd->add_option("--mediator-prefix", mediator_prefix,
                    "Prefix selecting mediator columns when --mediators is "
                    "not given")
        ->capture_default_str();
    cmd->add_option("--offset-col", offset,
                    "Sequencing depth column ('none' for unit offsets)")
        ->capture_default_str();
    cmd->add_option("--outcome-col", outcome, "Outcome column")
        ->capture_default_str();
  }

  ColumnSchema schema() const {
    ColumnSchema s;
    s.id = id;
    s.exposure = exposure;
    s.c1 = c1;
    s.c2 = c2;
    s.c3 = c3;
    s.mediators = mediators;
    s.mediator_prefix = mediator_prefix;
    if (offset != "none")
      s.offset = offset;
    s.outcome = outcome;
    return s;
  }
};

struct Common {
  std::string output_dir = ".";
  int threads = default_threads();
  std::uint64_t seed = 0;
  bool has_seed = false;

  void log(const std::string &msg) const {
    std::cerr << "[zimed";
    if (has_seed)
      std::cerr << " seed=" << seed;
    std::cerr << "] " << msg << '\n';
  }

  std::string out(const std::string &file) const {
    return (std::filesystem::path(output_dir) / file).string();
  }

  void prepare_output() const {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec || !std::filesystem::is_directory(output_dir))
      throw IOError("OutputDir", "cannot create output directory '" +
                                     output_dir + "'");
  }
};

Dataset load(const std::string &path, const SchemaFlags &flags) {
  if (!std::filesystem::exists(path))
    throw IOError("MissingInput", "input file '" + path + "' not found");
  return validate_dataset(read_csv(path), flags.schema());
}

std::vector<Family> parse_families(const std::vector<std::string> &names) {
  std::vector<Family> out;
  for (const auto &n : names)
    out.push_back(parse_family(n));
  return out;
}

std::vector<IntervalMethod> parse_methods(const std::vector<std::string> &v) {
  std::vector<IntervalMethod> out;
  for (const auto &m : v) {
    if (m == "fiducial")
      out.push_back(IntervalMethod::FiducialHDI);
    else if (m == "delta")
      out.push_back(IntervalMethod::Delta);
    else if (m == "npb")
      out.push_back(IntervalMethod::NPB);
    else
      throw UsageError("BadMethod", "unknown method '" + m +
                                        "' (fiducial, delta, npb)");
  }
  return out;
}

std::vector<double> parse_number_list(const std::string &text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size())
        throw std::invalid_argument(item);
    } catch (const std::exception &) {
      throw UsageError("BadAxis", "not a number: '" + item + "'");
    }
  }
  return out;
}

WlsCovariance parse_wls(const std::string &s) {
  if (s == "cluster")
    return WlsCovariance::ClusterRobust;
  if (s == "model")
    return WlsCovariance::Model;
  throw UsageError("BadOption", "--wls-cov must be cluster or model");
}

DeltaMode parse_delta(const std::string &s) {
  if (s == "marginal")
    return DeltaMode::Marginal;
  if (s == "conditional")
    return DeltaMode::Conditional;
  throw UsageError("BadOption", "--delta-mode must be marginal or conditional");
}

// ---- fit -------------------------------------------------------------------

struct FitCmd {
  std::string input;
  SchemaFlags schema;
  std::vector<std::string> families{"zinb"};
  int quad_nodes = 15;

  void run(const Common &c) const {
    c.prepare_output();
    const Dataset data = load(input, schema);
    const auto fams = parse_families(families);
    FitOptions fo;
    fo.quad_nodes = quad_nodes;
    nlohmann::json j;
    j["software_version"] = software_version;
    j["n"] = data.n();
    j["p"] = data.p();
    const ExposureFit ef = fit_exposure_model(data);
    j["exposure"] = {{"alpha", std::vector<double>(ef.alpha.data(),
                                                   ef.alpha.data() +
                                                       ef.alpha.size())},
                     {"marginal_exposed", ef.marginal_exposed}};
    Family chosen = fams.front();
    if (fams.size() > 1) {
      const auto ranks = model_selection(data, fams, fo);
      nlohmann::json table = nlohmann::json::array();
      for (const auto &r : ranks)
        table.push_back({{"family", to_string(r.family)},
                         {"aic", r.ok ? nlohmann::json(r.aic) : nullptr},
                         {"log_lik", r.ok ? nlohmann::json(r.log_lik) : nullptr},
                         {"n_params", r.n_params},
                         {"ok", r.ok},
                         {"error", r.error}});
      j["model_selection"] = table;
      chosen = ranks.front().family;
      c.log("AIC selects " + to_string(chosen));
    }
    const MediatorFit fit = fit_mediator_model(data, chosen, fo);
    const Eigen::VectorXd v = pack_theta(fit.theta_hat);
    const Eigen::MatrixXd covc = fit.cov_star;
    nlohmann::json covj = nlohmann::json::array();
    for (Eigen::Index r = 0; r < covc.rows(); ++r) {
      std::vector<double> row(covc.cols());
      for (Eigen::Index k = 0; k < covc.cols(); ++k)
        row[k] = covc(r, k);
      covj.push_back(row);
    }
    j["mediator"] = {
        {"family", to_string(fit.family)},
        {"theta_hat", std::vector<double>(v.data(), v.data() + v.size())},
        {"sigma_delta", fit.theta_hat.sigma_delta},
        {"log_lik", fit.log_lik},
        {"aic", fit.aic},
        {"n_free", fit.n_free},
        {"converged", fit.converged},
        {"iterations", fit.iterations},
        {"cov_star", covj},
        {"delta_hat", std::vector<double>(fit.delta_hat.data(),
                                          fit.delta_hat.data() +
                                              fit.delta_hat.size())},
        {"warnings", fit.warnings},
        {"taxa", data.taxon_names}};
    write_text(c.out("fit.json"), j.dump(2) + "\n");
    c.log("wrote " + c.out("fit.json"));
  }
};

// ---- mediate ---------------------------------------------------------------

struct MediateCmd {
  std::string input;
  SchemaFlags schema;
  std::string family = "zinb";
  int k = 2000;
  std::string n_equiv = "auto";
  std::vector<int> grid = default_equivalence_grid;
  double tol = 0.002;
  double alpha = 0.05;
  std::vector<std::string> methods{"fiducial", "delta", "npb"};
  int npb_reps = 1000;
  std::string wls_cov = "cluster";
  std::string delta_mode = "marginal";
  bool include_c3 = false;
  std::vector<double> truncate;
  bool write_weights = false;

  void run(const Common &c) const {
    c.prepare_output();
    const Dataset data = load(input, schema);
    c.log("loaded " + std::to_string(data.n()) + " subjects, " +
          std::to_string(data.p()) + " taxa");
    const auto meth = parse_methods(methods);
    auto wants = [&](IntervalMethod m) {
      return std::find(meth.begin(), meth.end(), m) != meth.end();
    };
    if (!wants(IntervalMethod::FiducialHDI))
      throw UsageError("BadMethod", "mediate always reports the fiducial "
                                    "interval; include 'fiducial'");

    PipelineOptions po;
    po.family = parse_family(family);
    po.wls.covariance = parse_wls(wls_cov);
    po.wls.include_c3 = include_c3;
    if (!truncate.empty()) {
      if (truncate.size() != 2)
        throw UsageError("BadOption", "--truncate takes two quantiles");
      po.truncation = std::make_pair(truncate[0], truncate[1]);
    }
    const PipelineResult base = run_pipeline(data, po);
    for (const auto &w : base.warnings)
      c.log("warning: " + w);
    if (write_weights) {
      write_weights_csv(ExpandedData(data), base.weights, data,
                        c.out("weights.csv"));
    }

    ReportMetadata meta;
    meta.family = to_string(po.family);
    meta.k_requested = k;
    meta.alpha = alpha;
    meta.seed = c.seed;
    meta.n = data.n();
    meta.p = data.p();
    meta.log_lik = base.mediator.log_lik;
    meta.aic = base.mediator.aic;
    meta.warnings = base.warnings;

    if (n_equiv == "auto") {
      const EquivalenceCalibration cal = equivalence_number(
          data, base.mediator, grid, tol, EigenNorm::L2,
          derive_seed(c.seed, 0, stream_tag::calibration), c.threads);
      write_calibration(cal, c.seed, c.out("calibration.json"));
      for (const auto &w : cal.warnings)
        meta.warnings.push_back("calibration: " + w);
      meta.n_equiv = cal.n_equiv;
      meta.n_equiv_calibrated = true;
      c.log("equivalence number N = " + std::to_string(cal.n_equiv));
    } else {
      try {
        meta.n_equiv = std::stoi(n_equiv);
      } catch (const std::exception &) {
        throw UsageError("BadOption", "--n must be an integer or 'auto'");
      }
    }

    FiducialOptions fo;
    fo.k = k;
    fo.n_equiv = meta.n_equiv;
    fo.alpha = alpha;
    fo.delta = parse_delta(delta_mode);
    fo.wls = po.wls;
    fo.seed = derive_seed(c.seed, 1, stream_tag::fiducial);
    fo.threads = c.threads;
    const FiducialDraws draws =
        fiducial_nie_samples(data, base.mediator, base.exposure, fo);
    meta.k_effective = draws.k;
    meta.conditional = draws.conditional;
    if (draws.k < draws.requested)
      meta.warnings.push_back(std::to_string(draws.requested - draws.k) +
                              " fiducial draws dropped");
    write_draws_csv(draws, data.taxon_names, c.out("draws.csv"));

    MediationReport rep;
    rep.names.push_back("NDE");
    for (const auto &t : data.taxon_names)
      rep.names.push_back(t);
    rep.fiducial = fiducial_intervals(draws, alpha);
    if (wants(IntervalMethod::Delta))
      rep.delta = delta_ci(data, base, po, alpha);
    if (wants(IntervalMethod::NPB)) {
      NpbOptions no;
      no.reps = npb_reps;
      no.alpha = alpha;
      no.seed = derive_seed(c.seed, 2, stream_tag::npb);
      no.threads = c.threads;
      const NpbResult nr = npb_ci(data, base, po, no);
      if (nr.dropped > 0)
        meta.warnings.push_back(std::to_string(nr.dropped) +
                                " bootstrap resamples dropped");
      rep.npb = nr.intervals;
    }
    rep.meta = meta;
    write_report(rep, c.output_dir);
    c.log("wrote report.json, report.csv and draws.csv to " + c.output_dir);
  }
};

// ---- simulate --------------------------------------------------------------

struct SimulateCmd {
  std::string preset_name;
  std::vector<std::string> axes;
  int n = 200;
  int p = 1;
  std::vector<double> pi{0.2};
  std::vector<double> phi{1.0};
  std::vector<double> beta0{-3.0};
  std::vector<double> beta1{0.6};
  std::vector<double> beta2{0.5};
  double sigma_delta_sq = 0.1;
  std::string generate_family = "zinb";
  std::string fit_family = "zinb";
  int reps = 1000;
  int k = 1000;
  int npb_reps = 200;
  int n_equiv = 0;
  double alpha = 0.05;
  std::vector<std::string> methods{"fiducial", "delta", "npb"};
  std::string wls_cov = "cluster";
  std::string delta_mode = "marginal";
  bool fix_gamma2 = false;

  void run(const Common &c) const {
    c.prepare_output();
    ScenarioConfig base;
    base.name = preset_name.empty() ? "scenario" : preset_name;
    base.n = n;
    base.p = p;
    base.pi = pi;
    base.phi = phi;
    base.beta0 = beta0;
    base.beta1 = beta1;
    base.beta2 = beta2;
    base.sigma_delta_sq = sigma_delta_sq;
    base.generate_family = parse_family(generate_family);
    base.fit_family = parse_family(fit_family);
    base.replications = reps;
    base.k_draws = k;
    base.npb_reps = npb_reps;
    if (n_equiv > 0)
      base.n_equiv = n_equiv;
    base.alpha = alpha;
    base.methods = parse_methods(methods);
    base.wls_covariance = parse_wls(wls_cov);
    base.fiducial_delta = parse_delta(delta_mode);
    base.fix_gamma2 = fix_gamma2;
    base.seed = c.seed;
    base.threads = c.threads;

    std::vector<ScenarioConfig> cells;
    if (!preset_name.empty()) {
      if (!axes.empty())
        throw UsageError("BadOption", "--preset and --axis are exclusive");
      cells = preset(preset_name, base);
    } else {
      std::vector<std::pair<std::string, std::vector<double>>> ax;
      for (const auto &a : axes) {
        const auto eq = a.find('=');
        if (eq == std::string::npos)
          throw UsageError("BadAxis", "axis must look like name=v1,v2");
        ax.emplace_back(a.substr(0, eq), parse_number_list(a.substr(eq + 1)));
      }
      cells = scenario_grid(base, ax);
    }
    std::vector<ScenarioResult> results;
    for (const auto &cfg : cells) {
      c.log("scenario " + cfg.name + " (" + std::to_string(cfg.replications) +
            " replications)");
      ScenarioResult r = run_scenario(cfg, false);
      if (r.failed)
        c.log("scenario " + cfg.name + " failed: " + r.failure_reason);
      results.push_back(std::move(r));
      // Rewrite after every cell so partial studies survive interruption.
      write_scenario_results(results, c.output_dir);
    }
    c.log("wrote scenario_results.csv and scenario_results.json to " +
          c.output_dir);
  }
};

// ---- calibrate-n -----------------------------------------------------------

struct CalibrateCmd {
  std::string input;
  SchemaFlags schema;
  std::string family = "zinb";
  std::vector<int> grid = default_equivalence_grid;
  double tol = 0.002;
  std::string norm = "l2";

  void run(const Common &c) const {
    c.prepare_output();
    const Dataset data = load(input, schema);
    const MediatorFit fit = fit_mediator_model(data, parse_family(family));
    EigenNorm en;
    if (norm == "l1")
      en = EigenNorm::L1;
    else if (norm == "l2")
      en = EigenNorm::L2;
    else
      throw UsageError("BadOption", "--norm must be l1 or l2");
    const EquivalenceCalibration cal = equivalence_number(
        data, fit, grid, tol, en,
        derive_seed(c.seed, 0, stream_tag::calibration), c.threads);
    write_calibration(cal, c.seed, c.out("calibration.json"));
    c.log("N = " + std::to_string(cal.n_equiv) + ", distance " +
          std::to_string(cal.distance));
  }
};

// ---- gof -------------------------------------------------------------------

struct GofCmd {
  std::string input;
  SchemaFlags schema;
  std::string family = "zinb";
  double alpha = 0.05;

  void run(const Common &c) const {
    c.prepare_output();
    const Dataset data = load(input, schema);
    FitOptions fo;
    fo.covariance = false;
    const MediatorFit fit = fit_mediator_model(data, parse_family(family), fo);
    const GofReport g = goodness_of_fit(fit, data, alpha);
    write_gof_csv(g, c.out("gof.csv"));
    int pass = 0;
    for (const auto &t : g.taxa)
      pass += t.pass ? 1 : 0;
    c.log(std::to_string(pass) + " of " + std::to_string(g.taxa.size()) +
          " taxa pass at alpha = " + std::to_string(alpha));
  }
};

// ---- summary ---------------------------------------------------------------

struct SummaryCmd {
  std::string input;
  SchemaFlags schema;
  std::string unassigned_col;

  void run(const Common &c) const {
    c.prepare_output();
    const Dataset data = load(input, schema);
    std::optional<Eigen::VectorXd> unassigned;
    if (!unassigned_col.empty()) {
      const RawTable t = read_csv(input);
      const int col = t.column(unassigned_col);
      if (col < 0)
        throw DataError("UnknownColumn", "no column '" + unassigned_col + "'");
      Eigen::VectorXd u(data.n());
      for (int i = 0; i < data.n(); ++i) {
        try {
          u(i) = std::stod(t.rows[i][col]);
        } catch (const std::exception &) {
          throw DataError("MissingValue", "bad unassigned count in row " +
                                              std::to_string(i + 1));
        }
      }
      unassigned = u;
    }
    write_summary_stats(emit_summary_stats(data, unassigned), c.output_dir);
    c.log("wrote summary.csv and depth.csv to " + c.output_dir);
  }
};

// ---- generate --------------------------------------------------------------

struct GenerateCmd {
  std::string output;
  int n = 300;
  int p = 5;
  std::vector<double> pi{0.2};
  std::vector<double> phi{1.0};
  std::vector<double> beta0{-3.0};
  std::vector<double> beta1{0.6};
  std::vector<double> beta2{0.5};
  double sigma_delta_sq = 0.1;
  std::string family = "zinb";
  bool depth_offsets = false;

  void run(const Common &c) const {
    ScenarioConfig cfg;
    cfg.name = "generate";
    cfg.n = n;
    cfg.p = p;
    cfg.pi = pi;
    cfg.phi = phi;
    cfg.beta0 = beta0;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.sigma_delta_sq = sigma_delta_sq;
    cfg.generate_family = parse_family(family);
    cfg.depth_offsets = depth_offsets;
    const Dataset d = generate_dataset(cfg, c.seed);
    write_dataset_csv(d, output);
    c.log("wrote " + std::to_string(n) + " subjects to " + output);
  }
};

void add_common(CLI::App *cmd, Common &c, bool stochastic) {
  cmd->add_option("--output-dir,-o", c.output_dir, "Output directory")
      ->envname("ZIMED_OUTPUT_DIR")
      ->capture_default_str();
  cmd->add_option("--threads", c.threads,
                  "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  if (stochastic)
    cmd->add_option("--seed", c.seed, "Random seed (required)")->required();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mediation analysis for zero-inflated count mediators"};
  app.set_version_flag("--version", std::string(software_version));
  app.set_config("--config", "", "TOML/INI run configuration; flags override");
  app.require_subcommand(1);

  Common common;
  FitCmd fit;
  MediateCmd med;
  SimulateCmd sim;
  CalibrateCmd cal;
  GofCmd gof;
  SummaryCmd sum;
  GenerateCmd gen;

  auto *c_fit = app.add_subcommand("fit", "Fit the exposure and mediator models");
  c_fit->add_option("--input,-i", fit.input, "Input CSV")->required();
  fit.schema.add(c_fit);
  c_fit->add_option("--family", fit.families,
                    "Mediator family; several run AIC model selection")
      ->capture_default_str();
  c_fit->add_option("--quad-nodes", fit.quad_nodes, "Gauss-Hermite nodes")
      ->check(CLI::Range(5, 101))
      ->capture_default_str();
  add_common(c_fit, common, false);

  auto *c_med = app.add_subcommand("mediate", "Fiducial and comparator "
                                              "intervals for NDE and NIEs");
  c_med->add_option("--input,-i", med.input, "Input CSV")->required();
  med.schema.add(c_med);
  c_med->add_option("--family", med.family)->capture_default_str();
  c_med->add_option("--k", med.k, "Fiducial draws")->capture_default_str();
  c_med->add_option("--n", med.n_equiv, "Equivalence number or 'auto'")
      ->capture_default_str();
  c_med->add_option("--grid", med.grid, "Candidate N for --n auto")
      ->capture_default_str();
  c_med->add_option("--tol", med.tol, "Calibration tolerance")
      ->capture_default_str();
  c_med->add_option("--alpha", med.alpha)->capture_default_str();
  c_med->add_option("--methods", med.methods, "fiducial, delta, npb")
      ->capture_default_str();
  c_med->add_option("--npb-reps", med.npb_reps)->capture_default_str();
  c_med->add_option("--wls-cov", med.wls_cov, "cluster or model")
      ->capture_default_str();
  c_med->add_option("--delta-mode", med.delta_mode,
                    "Random effect in fiducial weights: marginal or "
                    "conditional")
      ->capture_default_str();
  c_med->add_flag("--include-c3", med.include_c3,
                  "Add C3 columns to the outcome model");
  c_med->add_option("--truncate", med.truncate,
                    "Weight truncation quantiles, e.g. 0.01 0.99")
      ->expected(2);
  c_med->add_flag("--write-weights", med.write_weights,
                  "Also write weights.csv");
  add_common(c_med, common, true);

  auto *c_sim = app.add_subcommand("simulate", "Coverage study");
  c_sim->add_option("--preset", sim.preset_name, "fig5, fig6, fig7, misspec");
  c_sim->add_option("--axis", sim.axes, "Grid axis, e.g. pi=0.2,0.4");
  c_sim->add_option("--subjects", sim.n, "Sample size")->capture_default_str();
  c_sim->add_option("--p", sim.p, "Mediators")->capture_default_str();
  c_sim->add_option("--pi", sim.pi)->capture_default_str();
  c_sim->add_option("--phi", sim.phi)->capture_default_str();
  c_sim->add_option("--beta0", sim.beta0)->capture_default_str();
  c_sim->add_option("--beta1", sim.beta1)->capture_default_str();
  c_sim->add_option("--beta2", sim.beta2)->capture_default_str();
  c_sim->add_option("--sigma-delta-sq", sim.sigma_delta_sq)
      ->capture_default_str();
  c_sim->add_option("--generate-family", sim.generate_family)
      ->capture_default_str();
  c_sim->add_option("--fit-family", sim.fit_family)->capture_default_str();
  c_sim->add_option("--reps", sim.reps, "Replications")->capture_default_str();
  c_sim->add_option("--k", sim.k, "Fiducial draws")->capture_default_str();
  c_sim->add_option("--npb-reps", sim.npb_reps)->capture_default_str();
  c_sim->add_option("--n-equiv", sim.n_equiv,
                    "Equivalence number (0: calibrate per scenario)")
      ->capture_default_str();
  c_sim->add_option("--alpha", sim.alpha)->capture_default_str();
  c_sim->add_option("--methods", sim.methods)->capture_default_str();
  c_sim->add_option("--wls-cov", sim.wls_cov)->capture_default_str();
  c_sim->add_option("--delta-mode", sim.delta_mode)->capture_default_str();
  c_sim->add_flag("--fix-gamma2", sim.fix_gamma2,
                  "Draw gamma_2 once per scenario");
  add_common(c_sim, common, true);

  auto *c_cal = app.add_subcommand("calibrate-n", "Equivalence number");
  c_cal->add_option("--input,-i", cal.input, "Input CSV")->required();
  cal.schema.add(c_cal);
  c_cal->add_option("--family", cal.family)->capture_default_str();
  c_cal->add_option("--grid", cal.grid)->capture_default_str();
  c_cal->add_option("--tol", cal.tol)->capture_default_str();
  c_cal->add_option("--norm", cal.norm, "l1 or l2")->capture_default_str();
  add_common(c_cal, common, true);

  auto *c_gof = app.add_subcommand("gof", "Six-cell chi-square goodness of fit");
  c_gof->add_option("--input,-i", gof.input, "Input CSV")->required();
  gof.schema.add(c_gof);
  c_gof->add_option("--family", gof.family)->capture_default_str();
  c_gof->add_option("--alpha", gof.alpha)->capture_default_str();
  add_common(c_gof, common, false);

  auto *c_sum = app.add_subcommand("summary", "Descriptive statistics");
  c_sum->add_option("--input,-i", sum.input, "Input CSV")->required();
  sum.schema.add(c_sum);
  c_sum->add_option("--unassigned-col", sum.unassigned_col,
                    "Column of reads not assigned to any taxon");
  add_common(c_sum, common, false);

  auto *c_gen = app.add_subcommand("generate", "Write a simulated dataset");
  c_gen->add_option("--output", gen.output, "Output CSV")->required();
  c_gen->add_option("--subjects", gen.n)->capture_default_str();
  c_gen->add_option("--p", gen.p)->capture_default_str();
  c_gen->add_option("--pi", gen.pi)->capture_default_str();
  c_gen->add_option("--phi", gen.phi)->capture_default_str();
  c_gen->add_option("--beta0", gen.beta0)->capture_default_str();
  c_gen->add_option("--beta1", gen.beta1)->capture_default_str();
  c_gen->add_option("--beta2", gen.beta2)->capture_default_str();
  c_gen->add_option("--sigma-delta-sq", gen.sigma_delta_sq)
      ->capture_default_str();
  c_gen->add_option("--family", gen.family)->capture_default_str();
  c_gen->add_flag("--depth-offsets", gen.depth_offsets,
                  "Uniform sequencing depth instead of unit offsets");
  c_gen->add_option("--seed", common.seed, "Random seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorClass::Usage);
  }

  try {
    common.has_seed = c_med->parsed() || c_sim->parsed() || c_cal->parsed() ||
                      c_gen->parsed();
    if (c_fit->parsed())
      fit.run(common);
    else if (c_med->parsed())
      med.run(common);
    else if (c_sim->parsed())
      sim.run(common);
    else if (c_cal->parsed())
      cal.run(common);
    else if (c_gof->parsed())
      gof.run(common);
    else if (c_sum->parsed())
      sum.run(common);
    else if (c_gen->parsed())
      gen.run(common);
  } catch (const Error &e) {
    common.log(std::string("error: ") + e.what());
    return exit_code(e.error_class());
  } catch (const std::exception &e) {
    common.log(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
