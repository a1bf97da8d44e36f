#include "zimed/count_model.hpp"
#include "zimed/error.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace zimed {

std::string to_string(Family f) {
  switch (f) {
  case Family::Poisson:
    return "poisson";
  case Family::ZIPoisson:
    return "zip";
  case Family::NegBinomial:
    return "nb";
  case Family::ZINegBinomial:
    return "zinb";
  }
  return "unknown";
}

Family parse_family(const std::string &name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "poisson")
    return Family::Poisson;
  if (s == "zip" || s == "zipoisson")
    return Family::ZIPoisson;
  if (s == "nb" || s == "negbinomial")
    return Family::NegBinomial;
  if (s == "zinb" || s == "zinegbinomial")
    return Family::ZINegBinomial;
  throw UsageError("UnknownFamily", "unknown family '" + name + "'");
}

int free_parameter_count(Family f, int p, int r2) {
  int per_taxon = 2 + r2;
  if (zero_inflated(f))
    ++per_taxon;
  if (negative_binomial(f))
    ++per_taxon;
  return per_taxon * p + 1;
}

TaxonShape TaxonShape::make(Family f, double beta_z0, double beta_l0) {
  TaxonShape s;
  s.zi = zero_inflated(f);
  s.nb = negative_binomial(f);
  if (s.zi) {
    s.pi = expit(beta_z0);
    s.log_pi = -softplus(-beta_z0);
    s.log_1mpi = -softplus(beta_z0);
  }
  if (s.nb) {
    s.log_phi = beta_l0;
    s.phi = std::exp(beta_l0);
  }
  return s;
}

double log_pochhammer(double phi, int m) {
  if (m == 0)
    return 0.0;
  if (m <= 64) {
    double acc = 0.0;
    for (int k = 0; k < m; ++k)
      acc += std::log(phi + k);
    return acc;
  }
  if (phi > 1.0e5) {
    // Stirling difference; remaining terms are O(m / phi^2).
    const double mm = m;
    return (phi - 0.5) * std::log1p(mm / phi) + mm * std::log(mm + phi) - mm +
           (1.0 / (mm + phi) - 1.0 / phi) / 12.0;
  }
  return std::lgamma(phi + m) - std::lgamma(phi);
}

namespace {

double digamma_diff(double phi, int m) {
  if (m == 0)
    return 0.0;
  if (m <= 64) {
    double acc = 0.0;
    for (int k = 0; k < m; ++k)
      acc += 1.0 / (phi + k);
    return acc;
  }
  return boost::math::digamma(phi + m) - boost::math::digamma(phi);
}

// log g(m) for the base (non-inflated) law plus its derivatives.
struct Base {
  double lg, d_u, d_uu, d_lphi;
};

inline Base base_nb(int m, double u, const TaxonShape &s,
                    const CountConstants &cc, bool derivs) {
  // log(phi + lambda) - log(phi) and log(phi + lambda) - u, both stable.
  const double a = softplus(u - s.log_phi);
  const double b = softplus(s.log_phi - u);
  Base r{};
  r.lg = cc.log_norm - s.phi * a - m * b;
  if (derivs) {
    const double q = expit(u - s.log_phi); // lambda / (phi + lambda)
    const double oq = expit(s.log_phi - u);
    r.d_u = m * oq - s.phi * q;
    r.d_uu = -q * oq * (s.phi + m);
    // lambda = exp(u); (lambda - m)/(phi + lambda) = q - m (1 - q) / phi
    const double lam_minus_m = q - m * oq / s.phi;
    r.d_lphi = s.phi * (cc.digamma_diff - a + lam_minus_m);
  }
  return r;
}

inline Base base_poisson(int m, double u, const CountConstants &cc) {
  const double lam = std::exp(u);
  return Base{cc.log_norm + m * u - lam, m - lam, -lam, 0.0};
}

} // namespace

CountConstants count_constants(int m, const TaxonShape &shape,
                               bool with_digamma) {
  CountConstants cc;
  const double lfact = std::lgamma(m + 1.0);
  if (shape.nb) {
    cc.log_norm = log_pochhammer(shape.phi, m) - lfact;
    if (with_digamma)
      cc.digamma_diff = digamma_diff(shape.phi, m);
  } else {
    cc.log_norm = -lfact;
  }
  return cc;
}

double log_pmf(int m, double u, const TaxonShape &shape,
               const CountConstants &cc) {
  const double lg = shape.nb ? base_nb(m, u, shape, cc, false).lg
                             : base_poisson(m, u, cc).lg;
  if (!shape.zi)
    return lg;
  if (m > 0)
    return shape.log_1mpi + lg;
  return log_add_exp(shape.log_pi, shape.log_1mpi + lg);
}

double log_pmf(int m, double u, const TaxonShape &shape) {
  return log_pmf(m, u, shape, count_constants(m, shape, false));
}

LogPmf log_pmf_derivs(int m, double u, const TaxonShape &shape,
                      const CountConstants &cc) {
  const Base g = shape.nb ? base_nb(m, u, shape, cc, true)
                          : base_poisson(m, u, cc);
  LogPmf out;
  if (!shape.zi) {
    out.value = g.lg;
    out.d_u = g.d_u;
    out.d_uu = g.d_uu;
    out.d_lphi = g.d_lphi;
    return out;
  }
  if (m > 0) {
    out.value = shape.log_1mpi + g.lg;
    out.d_u = g.d_u;
    out.d_uu = g.d_uu;
    out.d_lphi = g.d_lphi;
    out.d_z0 = -shape.pi;
    return out;
  }
  const double nb_zero = shape.log_1mpi + g.lg;
  out.value = log_add_exp(shape.log_pi, nb_zero);
  const double r = std::exp(nb_zero - out.value); // P(count-law zero | 0)
  out.d_u = r * g.d_u;
  out.d_uu = r * g.d_uu + r * (1.0 - r) * g.d_u * g.d_u;
  out.d_lphi = r * g.d_lphi;
  out.d_z0 = (1.0 - r) * (1.0 - shape.pi) - r * shape.pi;
  return out;
}

int sample_count(double u, const TaxonShape &shape, Rng &rng) {
  if (shape.zi) {
    std::bernoulli_distribution structural(shape.pi);
    if (structural(rng))
      return 0;
  }
  double mean = std::exp(std::min(u, 30.0));
  if (shape.nb && shape.phi < 1.0e8) {
    std::gamma_distribution<double> gamma(shape.phi, mean / shape.phi);
    mean = gamma(rng);
  }
  if (!(mean > 0.0))
    return 0;
  std::poisson_distribution<int> pois(mean);
  return pois(rng);
}

} // namespace zimed
