#include "zimed/simulation.hpp"

#include "zimed/comparators.hpp"
#include "zimed/error.hpp"
#include "zimed/parallel.hpp"
#include "zimed/pipeline.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace zimed {

namespace {

double recycled(const std::vector<double> &v, int j) {
  return v.size() == 1 ? v.front() : v.at(j);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

} // namespace

double ScenarioConfig::pi_at(int j) const { return recycled(pi, j); }
double ScenarioConfig::phi_at(int j) const { return recycled(phi, j); }
double ScenarioConfig::beta0_at(int j) const { return recycled(beta0, j); }
double ScenarioConfig::beta1_at(int j) const { return recycled(beta1, j); }
double ScenarioConfig::beta2_at(int j) const { return recycled(beta2, j); }

void ScenarioConfig::validate() const {
  auto bad = [&](const std::string &why) {
    throw UsageError("BadScenario", name + ": " + why);
  };
  if (n < 2)
    bad("n must be at least 2");
  if (p < 1)
    bad("p must be at least 1");
  for (const auto *v : {&pi, &phi, &beta0, &beta1, &beta2})
    if (v->empty() || (v->size() != 1 && static_cast<int>(v->size()) != p))
      bad("per-taxon parameters need 1 or p entries");
  for (int j = 0; j < p; ++j) {
    if (!(pi_at(j) >= 0.0 && pi_at(j) < 1.0))
      bad("pi must lie in [0, 1)");
    if (!(phi_at(j) > 0.0))
      bad("phi must be positive");
  }
  if (sigma_delta_sq < 0.0 || noise_sd < 0.0 || gamma2_sd < 0.0)
    bad("variances must be nonnegative");
  if (replications < 1)
    bad("replications must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    bad("alpha must lie in (0, 1)");
}

Dataset generate_dataset(const ScenarioConfig &cfg, std::uint64_t seed,
                         const std::optional<Eigen::VectorXd> &gamma2) {
  cfg.validate();
  const int n = cfg.n, p = cfg.p;
  Rng rng = make_stream(seed, 0, stream_tag::simulate);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> depth(10000, 100000);

  Eigen::VectorXd g2(p);
  if (gamma2) {
    if (gamma2->size() != p)
      throw UsageError("BadScenario", "gamma2 needs p entries");
    g2 = *gamma2;
  } else {
    for (int j = 0; j < p; ++j)
      g2(j) = cfg.gamma2_mean + cfg.gamma2_sd * normal(rng);
  }

  std::vector<TaxonShape> shapes(p);
  for (int j = 0; j < p; ++j) {
    TaxonShape &s = shapes[j];
    s.zi = zero_inflated(cfg.generate_family) && cfg.pi_at(j) > 0.0;
    s.pi = s.zi ? cfg.pi_at(j) : 0.0;
    s.nb = negative_binomial(cfg.generate_family);
    if (s.nb) {
      s.phi = cfg.phi_at(j);
      s.log_phi = std::log(s.phi);
    }
  }

  Dataset d;
  d.subject_id.resize(n);
  d.exposure.resize(n);
  d.c1.resize(n, 1);
  d.c2.resize(n, 1);
  d.c3.resize(n, 1);
  d.mediators.resize(n, p);
  d.offset.resize(n);
  d.outcome.resize(n);
  d.c1_names = {"c1"};
  d.c2_names = {"c2"};
  d.c3_names = {"c3"};
  for (int j = 0; j < p; ++j)
    d.taxon_names.push_back("taxon" + std::to_string(j + 1));

  const double sd_delta = std::sqrt(cfg.sigma_delta_sq);
  for (int i = 0; i < n; ++i) {
    d.subject_id[i] = "s" + std::to_string(i + 1);
    const double c1 = normal(rng), c2 = normal(rng), c3 = normal(rng);
    d.c1(i, 0) = c1;
    d.c2(i, 0) = c2;
    d.c3(i, 0) = c3;
    std::bernoulli_distribution exposed(expit(cfg.alpha0 + cfg.alpha1 * c2));
    const int a = exposed(rng) ? 1 : 0;
    d.exposure(i) = a;
    const double delta = sd_delta * normal(rng);
    const double zeta = cfg.depth_offsets ? depth(rng) : 1.0;
    d.offset(i) = zeta;
    double y = cfg.gamma0 + cfg.gamma1 * a + cfg.gamma3 * c3;
    for (int j = 0; j < p; ++j) {
      const double u = cfg.beta0_at(j) + cfg.beta1_at(j) * a +
                       cfg.beta2_at(j) * c2 + std::log(zeta) + delta;
      const int m = sample_count(u, shapes[j], rng);
      d.mediators(i, j) = m;
      y += g2(j) * m;
    }
    d.outcome(i) = y + cfg.noise_sd * normal(rng);
  }
  return d;
}

double gold_standard_nie(const ScenarioConfig &cfg, int j) {
  if (cfg.depth_offsets)
    throw UsageError("UnsupportedGenerator",
                     "the closed form assumes unit offsets");
  if (j < 0 || j >= cfg.p)
    throw UsageError("UnsupportedGenerator", "taxon index out of range");
  const double pi = zero_inflated(cfg.generate_family) ? cfg.pi_at(j) : 0.0;
  const double b0 = cfg.beta0_at(j), b1 = cfg.beta1_at(j), b2 = cfg.beta2_at(j);
  const double common = b0 + 0.5 * b2 * b2 + 0.5 * cfg.sigma_delta_sq;
  return cfg.gamma2_mean * (1.0 - pi) *
         (std::exp(common + b1) - std::exp(common));
}

EquivalenceCalibration calibrate_scenario(const ScenarioConfig &cfg) {
  const std::uint64_t s = derive_seed(cfg.seed, 0, stream_tag::calibration);
  const Dataset d = generate_dataset(cfg, s);
  const MediatorFit fit = fit_mediator_model(d, cfg.fit_family);
  return equivalence_number(d, fit, cfg.n_grid, 0.002, EigenNorm::L2,
                            derive_seed(s, 1), cfg.threads);
}

namespace {

bool wants(const ScenarioConfig &cfg, IntervalMethod m) {
  for (auto x : cfg.methods)
    if (x == m)
      return true;
  return false;
}

ReplicationRecord run_replication(const ScenarioConfig &cfg, int r, int n_equiv,
                                  const std::optional<Eigen::VectorXd> &gamma2) {
  ReplicationRecord rec;
  const std::uint64_t seed =
      derive_seed(cfg.seed, static_cast<std::uint64_t>(r), stream_tag::simulate);
  try {
    const Dataset data = generate_dataset(cfg, seed, gamma2);
    PipelineOptions po;
    po.family = cfg.fit_family;
    po.wls.covariance = cfg.wls_covariance;
    po.fit.covariance = wants(cfg, IntervalMethod::FiducialHDI) ||
                        wants(cfg, IntervalMethod::Delta);
    const PipelineResult base = run_pipeline(data, po);
    for (const IntervalMethod m : cfg.methods) {
      switch (m) {
      case IntervalMethod::FiducialHDI: {
        FiducialOptions fo;
        fo.k = cfg.k_draws;
        fo.n_equiv = n_equiv;
        fo.alpha = cfg.alpha;
        fo.delta = cfg.fiducial_delta;
        fo.wls = po.wls;
        fo.seed = derive_seed(seed, 1, stream_tag::fiducial);
        fo.threads = 1;
        const FiducialDraws draws =
            fiducial_nie_samples(data, base.mediator, base.exposure, fo);
        rec.intervals[m] = fiducial_intervals(draws, cfg.alpha);
        break;
      }
      case IntervalMethod::Delta:
        rec.intervals[m] = delta_ci(data, base, po, cfg.alpha);
        break;
      case IntervalMethod::NPB: {
        NpbOptions no;
        no.reps = cfg.npb_reps;
        no.alpha = cfg.alpha;
        no.seed = derive_seed(seed, 2, stream_tag::npb);
        no.threads = 1;
        rec.intervals[m] = npb_ci(data, base, po, no).intervals;
        break;
      }
      }
    }
    rec.ok = true;
  } catch (const Error &e) {
    rec.ok = false;
    rec.intervals.clear();
    rec.error = e.what();
  }
  return rec;
}

} // namespace

ScenarioResult run_scenario(const ScenarioConfig &cfg, bool throw_on_failure) {
  cfg.validate();
  ScenarioResult res;
  res.config = cfg;
  const int threads = cfg.threads > 0 ? cfg.threads : default_threads();

  std::optional<Eigen::VectorXd> gamma2;
  if (cfg.fix_gamma2) {
    Rng rng = make_stream(cfg.seed, 1, stream_tag::simulate);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd g(cfg.p);
    for (int j = 0; j < cfg.p; ++j)
      g(j) = cfg.gamma2_mean + cfg.gamma2_sd * normal(rng);
    gamma2 = g;
  }

  if (wants(cfg, IntervalMethod::FiducialHDI))
    res.n_equiv = cfg.n_equiv ? *cfg.n_equiv : calibrate_scenario(cfg).n_equiv;

  res.replications.resize(cfg.replications);
  parallel_for(cfg.replications, threads, [&](int r) {
    res.replications[r] = run_replication(cfg, r, res.n_equiv, gamma2);
  });
  for (const auto &rec : res.replications)
    res.failures += rec.ok ? 0 : 1;

  if (res.failures > 0.05 * cfg.replications) {
    res.failed = true;
    std::string first;
    for (const auto &rec : res.replications)
      if (!rec.ok) {
        first = rec.error;
        break;
      }
    res.failure_reason = std::to_string(res.failures) + " of " +
                         std::to_string(cfg.replications) +
                         " replications failed; first: " + first;
    if (throw_on_failure)
      throw ConvergenceError("TooManyFailures", cfg.name + ": " +
                                                    res.failure_reason);
    return res;
  }

  std::vector<double> gsv{gold_standard_nde(cfg)};
  std::vector<std::string> names{"nde"};
  for (int j = 0; j < cfg.p; ++j) {
    gsv.push_back(gold_standard_nie(cfg, j));
    names.push_back("nie_" + std::to_string(j + 1));
  }
  for (const IntervalMethod m : cfg.methods) {
    for (std::size_t e = 0; e < gsv.size(); ++e) {
      MethodEffectResult row;
      row.method = m;
      row.effect = names[e];
      row.gsv = gsv[e];
      double cover = 0, width = 0, sens = 0, est = 0;
      for (const auto &rec : res.replications) {
        if (!rec.ok)
          continue;
        const IntervalSummary &s = rec.intervals.at(m)[e];
        cover += s.covers(gsv[e]) ? 1.0 : 0.0;
        width += s.width;
        sens += s.excludes_zero() ? 1.0 : 0.0;
        est += s.estimate;
        ++row.effective;
      }
      if (row.effective > 0) {
        const double k = row.effective;
        row.coverage = cover / k;
        row.mean_width = width / k;
        row.sensitivity = sens / k;
        row.bias = est / k - gsv[e];
      }
      res.rows.push_back(row);
    }
  }
  return res;
}

std::vector<ScenarioConfig> scenario_grid(
    const ScenarioConfig &base,
    const std::vector<std::pair<std::string, std::vector<double>>> &axes) {
  std::vector<ScenarioConfig> out{base};
  for (const auto &[axis, values] : axes) {
    if (values.empty())
      throw UsageError("BadGrid", "axis '" + axis + "' has no values");
    std::vector<ScenarioConfig> next;
    for (const auto &cfg : out) {
      for (const double v : values) {
        ScenarioConfig c = cfg;
        if (axis == "pi")
          c.pi = {v};
        else if (axis == "phi")
          c.phi = {v};
        else if (axis == "n")
          c.n = static_cast<int>(v);
        else if (axis == "p")
          c.p = static_cast<int>(v);
        else if (axis == "beta1")
          c.beta1 = {v};
        else if (axis == "sigma_delta_sq")
          c.sigma_delta_sq = v;
        else if (axis == "fit_family")
          c.fit_family = static_cast<Family>(static_cast<int>(v));
        else
          throw UsageError("BadGrid", "unknown axis '" + axis + "'");
        c.name += "/" + axis + "=" +
                  (axis == "fit_family" ? to_string(c.fit_family) : fmt(v));
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (!axes.empty())
      out[c].seed = derive_seed(base.seed, c, stream_tag::simulate);
    out[c].validate();
  }
  return out;
}

std::vector<ScenarioConfig> preset(const std::string &name,
                                   const ScenarioConfig &base) {
  ScenarioConfig b = base;
  b.name = name;
  if (name == "fig5")
    return scenario_grid(b, {{"pi", {0.2, 0.4, 0.6}},
                             {"n", {20, 40, 80, 200, 300}}});
  if (name == "fig6")
    return scenario_grid(b, {{"p", {1, 3, 5}}, {"n", {20, 40, 80, 200, 300}}});
  if (name == "fig7")
    return scenario_grid(b, {{"phi", {0.5, 1.0, 10.0}},
                             {"n", {20, 40, 80, 200, 300, 400}}});
  if (name == "misspec") {
    b.generate_family = Family::ZINegBinomial;
    b.fit_family = Family::ZIPoisson;
    b.n = 200;
    return scenario_grid(b, {{"pi", {0.2, 0.4, 0.6}}});
  }
  throw UsageError("UnknownPreset", "unknown preset '" + name +
                                        "' (fig5, fig6, fig7, misspec)");
}

} // namespace zimed
