#include "zimed/report.hpp"

#include "zimed/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace zimed {

using nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

json interval_json(const IntervalSummary &s) {
  json j;
  j["method"] = to_string(s.method);
  j["estimate"] = s.estimate;
  j["lower"] = s.lower;
  j["upper"] = s.upper;
  j["width"] = s.width;
  j["alpha"] = s.alpha;
  j["gen_p_value"] = s.gen_p_value ? json(*s.gen_p_value) : json(nullptr);
  return j;
}

std::string join_path(const std::string &dir, const std::string &file) {
  return (std::filesystem::path(dir) / file).string();
}

} // namespace

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IOError("WriteFailed", "cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out)
    throw IOError("WriteFailed", "error writing '" + path + "'");
}

std::string report_json(const MediationReport &r) {
  json j;
  json rows = json::array();
  for (std::size_t e = 0; e < r.names.size(); ++e) {
    json row;
    row["name"] = r.names[e];
    row["fiducial"] = interval_json(r.fiducial[e]);
    row["delta"] = r.delta ? interval_json((*r.delta)[e]) : json(nullptr);
    row["npb"] = r.npb ? interval_json((*r.npb)[e]) : json(nullptr);
    rows.push_back(row);
  }
  j["effects"] = rows;
  const ReportMetadata &m = r.meta;
  j["metadata"] = {{"software_version", software_version},
                   {"family", m.family},
                   {"k_requested", m.k_requested},
                   {"k_effective", m.k_effective},
                   {"n_equiv", m.n_equiv},
                   {"n_equiv_calibrated", m.n_equiv_calibrated},
                   {"conditional_on_delta", m.conditional},
                   {"alpha", m.alpha},
                   {"seed", m.seed},
                   {"n", m.n},
                   {"p", m.p},
                   {"log_lik", m.log_lik},
                   {"aic", m.aic},
                   {"warnings", m.warnings}};
  return j.dump(2) + "\n";
}

std::string report_csv(const MediationReport &r) {
  std::ostringstream os;
  os << "name,estimate,gci_lower,gci_upper,gci_width,gen_p_value,"
        "delta_estimate,delta_lower,delta_upper,delta_width,"
        "npb_estimate,npb_lower,npb_upper,npb_width\n";
  auto block = [&](const std::optional<std::vector<IntervalSummary>> &v,
                   std::size_t e) {
    if (!v) {
      os << ",,,,";
      return;
    }
    const IntervalSummary &s = (*v)[e];
    os << ',' << num(s.estimate) << ',' << num(s.lower) << ','
       << num(s.upper) << ',' << num(s.width);
  };
  for (std::size_t e = 0; e < r.names.size(); ++e) {
    const IntervalSummary &f = r.fiducial[e];
    os << r.names[e] << ',' << num(f.estimate) << ',' << num(f.lower) << ','
       << num(f.upper) << ',' << num(f.width) << ','
       << (f.gen_p_value ? num(*f.gen_p_value) : std::string());
    block(r.delta, e);
    block(r.npb, e);
    os << '\n';
  }
  return os.str();
}

void write_report(const MediationReport &r, const std::string &dir) {
  write_text(join_path(dir, "report.json"), report_json(r));
  write_text(join_path(dir, "report.csv"), report_csv(r));
}

void write_draws_csv(const FiducialDraws &d,
                     const std::vector<std::string> &taxa,
                     const std::string &path) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "k,nde";
  for (const auto &t : taxa)
    os << ",nie_" << t;
  os << ",sigma_delta\n";
  for (int k = 0; k < d.k; ++k) {
    os << k << ',' << d.nde_draws(k);
    for (Eigen::Index j = 0; j < d.nie_draws.cols(); ++j)
      os << ',' << d.nie_draws(k, j);
    os << ',' << d.sigma_delta_draws(k) << '\n';
  }
  write_text(path, os.str());
}

std::string calibration_json(const EquivalenceCalibration &c,
                             std::uint64_t seed) {
  json trace = json::array();
  for (const auto &[n, d] : c.search_trace)
    trace.push_back({{"n", n}, {"distance", d}});
  json j = {{"n_equiv", c.n_equiv},
            {"distance", c.distance},
            {"bootstrap_reps", c.bootstrap_reps},
            {"within_tolerance", c.within_tolerance},
            {"search_trace", trace},
            {"warnings", c.warnings},
            {"seed", seed},
            {"software_version", software_version}};
  return j.dump(2) + "\n";
}

void write_calibration(const EquivalenceCalibration &c, std::uint64_t seed,
                       const std::string &path) {
  write_text(path, calibration_json(c, seed));
}

void write_gof_csv(const GofReport &g, const std::string &path) {
  std::ostringstream os;
  os << "taxon,cell,lower,upper,observed,expected,chi2,df,p_value,pass,error\n";
  for (const auto &t : g.taxa) {
    if (!t.error.empty()) {
      std::string err = t.error;
      std::replace(err.begin(), err.end(), ',', ';');
      os << t.taxon << ",,,,,,,,,," << err << '\n';
      continue;
    }
    for (std::size_t c = 0; c < t.cells.size(); ++c) {
      const GofCell &cell = t.cells[c];
      os << t.taxon << ',' << c + 1 << ',' << cell.lower << ','
         << (cell.upper < 0 ? std::string("inf") : std::to_string(cell.upper))
         << ',' << num(cell.observed) << ',' << num(cell.expected) << ','
         << num(t.chi2) << ',' << t.df << ',' << num(t.p_value) << ','
         << (t.pass ? "true" : "false") << ",\n";
    }
  }
  write_text(path, os.str());
}

const std::vector<std::string> &scenario_results_columns() {
  static const std::vector<std::string> cols{
      "scenario", "n",          "p",           "pi",   "phi",
      "fit_family", "method",   "effect",      "gsv",  "coverage",
      "mean_width", "sensitivity", "bias",     "effective", "failures",
      "n_equiv",  "status"};
  return cols;
}

std::string scenario_results_csv(const std::vector<ScenarioResult> &results) {
  std::ostringstream os;
  const auto &cols = scenario_results_columns();
  for (std::size_t c = 0; c < cols.size(); ++c)
    os << (c ? "," : "") << cols[c];
  os << '\n';
  for (const auto &r : results) {
    const ScenarioConfig &cfg = r.config;
    const std::string head = cfg.name + ',' + std::to_string(cfg.n) + ',' +
                             std::to_string(cfg.p) + ',' + num(cfg.pi_at(0)) +
                             ',' + num(cfg.phi_at(0)) + ',' +
                             to_string(cfg.fit_family);
    if (r.failed) {
      os << head << ",,,,,,,,," << r.failures << ',' << r.n_equiv
         << ",failed\n";
      continue;
    }
    for (const auto &row : r.rows)
      os << head << ',' << to_string(row.method) << ',' << row.effect << ','
         << num(row.gsv) << ',' << num(row.coverage) << ','
         << num(row.mean_width) << ',' << num(row.sensitivity) << ','
         << num(row.bias) << ',' << row.effective << ',' << r.failures << ','
         << r.n_equiv << ",ok\n";
  }
  return os.str();
}

std::string scenario_results_json(const std::vector<ScenarioResult> &results) {
  json arr = json::array();
  for (const auto &r : results) {
    const ScenarioConfig &cfg = r.config;
    json rows = json::array();
    for (const auto &row : r.rows)
      rows.push_back({{"method", to_string(row.method)},
                      {"effect", row.effect},
                      {"gsv", row.gsv},
                      {"coverage", row.coverage},
                      {"mean_width", row.mean_width},
                      {"sensitivity", row.sensitivity},
                      {"bias", row.bias},
                      {"effective", row.effective}});
    arr.push_back({{"scenario", cfg.name},
                   {"n", cfg.n},
                   {"p", cfg.p},
                   {"pi", cfg.pi},
                   {"phi", cfg.phi},
                   {"beta0", cfg.beta0},
                   {"beta1", cfg.beta1},
                   {"beta2", cfg.beta2},
                   {"sigma_delta_sq", cfg.sigma_delta_sq},
                   {"generate_family", to_string(cfg.generate_family)},
                   {"fit_family", to_string(cfg.fit_family)},
                   {"replications", cfg.replications},
                   {"k_draws", cfg.k_draws},
                   {"npb_reps", cfg.npb_reps},
                   {"seed", cfg.seed},
                   {"n_equiv", r.n_equiv},
                   {"failures", r.failures},
                   {"status", r.failed ? "failed" : "ok"},
                   {"failure_reason", r.failure_reason},
                   {"rows", rows}});
  }
  json j = {{"software_version", software_version}, {"scenarios", arr}};
  return j.dump(2) + "\n";
}

void write_scenario_results(const std::vector<ScenarioResult> &results,
                            const std::string &dir) {
  write_text(join_path(dir, "scenario_results.csv"),
             scenario_results_csv(results));
  write_text(join_path(dir, "scenario_results.json"),
             scenario_results_json(results));
}

SummaryStats emit_summary_stats(const Dataset &data,
                                const std::optional<Eigen::VectorXd> &unassigned) {
  SummaryStats s;
  const int n = data.n();
  for (int j = 0; j < data.p(); ++j) {
    TaxonSummary t;
    t.taxon = data.taxon_names.at(j);
    std::vector<double> v(n);
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
      v[i] = data.mediators(i, j);
      zeros += data.mediators(i, j) == 0 ? 1 : 0;
    }
    t.zero_prop = static_cast<double>(zeros) / n;
    t.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
      m2 += (x - t.mean) * (x - t.mean);
      m3 += (x - t.mean) * (x - t.mean) * (x - t.mean);
    }
    m2 /= n;
    m3 /= n;
    t.sd = n > 1 ? std::sqrt(m2 * n / (n - 1)) : 0.0;
    t.degenerate = m2 == 0.0;
    t.skewness = t.degenerate ? 0.0 : m3 / std::pow(m2, 1.5);
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      const double pos = p * (n - 1);
      const auto a = static_cast<std::size_t>(std::floor(pos));
      const auto b = std::min<std::size_t>(a + 1, v.size() - 1);
      return v[a] + (pos - a) * (v[b] - v[a]);
    };
    t.q25 = q(0.25);
    t.q50 = q(0.5);
    t.q75 = q(0.75);
    t.q90 = q(0.9);
    t.max = static_cast<int>(v.back());
    s.taxa.push_back(t);
  }
  s.subject_id = data.subject_id;
  s.depth = data.mediators.cast<double>().rowwise().sum();
  if (unassigned) {
    if (unassigned->size() != n)
      throw DataError("LengthMismatch", "unassigned reads need n entries");
    s.depth += *unassigned;
  }
  return s;
}

void write_summary_stats(const SummaryStats &s, const std::string &dir) {
  std::ostringstream os;
  os << "taxon,zero_prop,mean,sd,q25,q50,q75,q90,max,skewness,degenerate\n";
  for (const auto &t : s.taxa)
    os << t.taxon << ',' << num(t.zero_prop) << ',' << num(t.mean) << ','
       << num(t.sd) << ',' << num(t.q25) << ',' << num(t.q50) << ','
       << num(t.q75) << ',' << num(t.q90) << ',' << t.max << ','
       << num(t.skewness) << ',' << (t.degenerate ? "true" : "false") << '\n';
  write_text(join_path(dir, "summary.csv"), os.str());
  std::ostringstream ds;
  ds << "subject,depth\n";
  for (std::size_t i = 0; i < s.subject_id.size(); ++i)
    ds << s.subject_id[i] << ',' << num(s.depth(static_cast<Eigen::Index>(i)))
       << '\n';
  write_text(join_path(dir, "depth.csv"), ds.str());
}

} // namespace zimed
