#include "zimed/gof.hpp"

#include "zimed/error.hpp"
#include "zimed/quadrature.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>

namespace zimed {

namespace {

// Sum over subjects of the fitted mass of M_ij = m, m = 0..m_max, with the
// random effect integrated out.
std::vector<double> pooled_masses(const MediatorFit &fit, const Dataset &data,
                                  int j, int m_max) {
  const auto shapes = taxon_shapes(fit.family, fit.theta_hat);
  const NormalRule &rule = normal_rule(9);
  const double sigma = fit.theta_hat.sigma_delta;
  const int nq = sigma > 0.0 ? static_cast<int>(rule.nodes.size()) : 1;
  std::vector<double> total(m_max + 1, 0.0);
  std::vector<CountConstants> cc(m_max + 1);
  for (int m = 0; m <= m_max; ++m)
    cc[m] = count_constants(m, shapes[j], false);
  for (int i = 0; i < data.n(); ++i) {
    const double eta =
        linear_predictor(fit.theta_hat, data, i, j, data.exposure(i));
    for (int q = 0; q < nq; ++q) {
      const double w = sigma > 0.0 ? rule.weights[q] : 1.0;
      const double u = sigma > 0.0 ? eta + sigma * rule.nodes[q] : eta;
      for (int m = 0; m <= m_max; ++m)
        total[m] += w * std::exp(log_pmf(m, u, shapes[j], cc[m]));
    }
  }
  return total;
}

} // namespace

TaxonGof goodness_of_fit_taxon(const MediatorFit &fit, const Dataset &data,
                               int j, double alpha) {
  const int n = data.n();
  TaxonGof out;
  out.taxon = j < static_cast<int>(data.taxon_names.size())
                  ? data.taxon_names[j]
                  : "taxon" + std::to_string(j + 1);
  const int obs_max = data.mediators.col(j).maxCoeff();
  if (obs_max == 0)
    throw DataError("DegenerateCells", out.taxon + " has no positive counts");

  // Extend the support until the fitted tail mass is negligible.
  int m_max = std::max(obs_max, 16);
  std::vector<double> mass;
  for (;;) {
    mass = pooled_masses(fit, data, j, m_max);
    double s = 0.0;
    for (double v : mass)
      s += v;
    if (n - s < 1e-8 * n || m_max >= (1 << 20))
      break;
    m_max *= 2;
  }

  // Quintile breaks of the positive part.
  double positive = 0.0;
  for (int m = 1; m <= m_max; ++m)
    positive += mass[m];
  std::vector<int> upper_bounds; // inclusive upper bound of cells 2..5
  double cum = 0.0;
  int k = 1;
  for (int m = 1; m <= m_max && k < 5; ++m) {
    cum += mass[m];
    while (k < 5 && cum >= positive * k / 5.0) {
      if (upper_bounds.empty() || upper_bounds.back() != m)
        upper_bounds.push_back(m);
      ++k;
    }
  }
  std::vector<GofCell> cells;
  cells.push_back({0, 0, 0.0, 0.0});
  int lo = 1;
  for (int b : upper_bounds) {
    cells.push_back({lo, b, 0.0, 0.0});
    lo = b + 1;
  }
  cells.push_back({lo, -1, 0.0, 0.0});

  for (auto &c : cells) {
    const int hi = c.upper < 0 ? m_max : c.upper;
    for (int m = c.lower; m <= hi; ++m)
      c.expected += mass[m];
  }
  // Put any truncated tail into the open cell so expected sums to n.
  double esum = 0.0;
  for (const auto &c : cells)
    esum += c.expected;
  cells.back().expected += std::max(0.0, n - esum);
  for (int i = 0; i < n; ++i) {
    const int m = data.mediators(i, j);
    for (auto &c : cells)
      if (m >= c.lower && (c.upper < 0 || m <= c.upper)) {
        c.observed += 1.0;
        break;
      }
  }

  // Merge sparse cells rightward; the last one merges leftward.
  std::vector<GofCell> merged;
  GofCell acc;
  bool open = false;
  for (const auto &c : cells) {
    if (!open) {
      acc = c;
      open = true;
    } else {
      acc.upper = c.upper;
      acc.observed += c.observed;
      acc.expected += c.expected;
    }
    if (acc.expected >= 5.0) {
      merged.push_back(acc);
      open = false;
    }
  }
  if (open) {
    if (merged.empty()) {
      merged.push_back(acc);
    } else {
      merged.back().upper = acc.upper;
      merged.back().observed += acc.observed;
      merged.back().expected += acc.expected;
    }
  }
  out.cells = merged;
  if (merged.size() < 3)
    throw DataError("DegenerateCells",
                    out.taxon + ": only " + std::to_string(merged.size()) +
                        " cells after merging");

  for (const auto &c : merged)
    out.chi2 += (c.observed - c.expected) * (c.observed - c.expected) /
                c.expected;
  const int shape_params = (zero_inflated(fit.family) ? 1 : 0) +
                           (negative_binomial(fit.family) ? 1 : 0);
  out.df = std::max(1, static_cast<int>(merged.size()) - 1 - shape_params);
  const boost::math::chi_squared_distribution<double> dist(out.df);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.chi2));
  out.pass = out.p_value >= alpha;
  return out;
}

GofReport goodness_of_fit(const MediatorFit &fit, const Dataset &data,
                          double alpha) {
  GofReport r;
  r.alpha = alpha;
  for (int j = 0; j < data.p(); ++j) {
    try {
      r.taxa.push_back(goodness_of_fit_taxon(fit, data, j, alpha));
    } catch (const DataError &e) {
      TaxonGof t;
      t.taxon = data.taxon_names.at(j);
      t.error = e.what();
      r.taxa.push_back(t);
    }
  }
  return r;
}

} // namespace zimed
