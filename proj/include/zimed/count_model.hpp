#ifndef ZIMED_COUNT_MODEL_HPP
#define ZIMED_COUNT_MODEL_HPP

#include "zimed/rng.hpp"

#include <cmath>
#include <utility>

#include <string>

namespace zimed {

enum class Family { Poisson, ZIPoisson, NegBinomial, ZINegBinomial };

inline bool zero_inflated(Family f) {
  return f == Family::ZIPoisson || f == Family::ZINegBinomial;
}
inline bool negative_binomial(Family f) {
  return f == Family::NegBinomial || f == Family::ZINegBinomial;
}

std::string to_string(Family f);
// Accepts poisson, zip, nb, zinb (case-insensitive) and the long names.
Family parse_family(const std::string &name);

// Free mediator-model parameters: per taxon the mean block (2 + r2), plus
// beta_z0 and beta_l0 where the family has them, plus sigma_delta.
int free_parameter_count(Family f, int p, int r2);

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}
inline double log_add_exp(double a, double b) {
  if (a < b)
    std::swap(a, b);
  if (b == -INFINITY)
    return a;
  return a + std::log1p(std::exp(b - a));
}

// Distribution parameters of one taxon that do not vary by subject.
// pi = expit(beta_z0); phi = exp(beta_l0); variance = lambda + lambda^2 / phi.
struct TaxonShape {
  bool zi = false;
  bool nb = false;
  double pi = 0.0;
  double log_pi = -INFINITY;
  double log_1mpi = 0.0;
  double phi = INFINITY;
  double log_phi = INFINITY;

  static TaxonShape make(Family f, double beta_z0, double beta_l0);
};

// Subject-invariant pieces of log P(M = m) for one count value.
struct CountConstants {
  double log_norm = 0.0; // log C(m + phi - 1, m) or -log m!
  double digamma_diff = 0.0; // psi(m + phi) - psi(phi), NB only
};
CountConstants count_constants(int m, const TaxonShape &shape,
                               bool with_digamma);

// log P(M = m) and derivatives with respect to the log mean u, log phi and
// beta_z0.
struct LogPmf {
  double value = 0.0;
  double d_u = 0.0;
  double d_uu = 0.0;
  double d_lphi = 0.0;
  double d_z0 = 0.0;
};

double log_pmf(int m, double u, const TaxonShape &shape,
               const CountConstants &cc);
double log_pmf(int m, double u, const TaxonShape &shape);
LogPmf log_pmf_derivs(int m, double u, const TaxonShape &shape,
                      const CountConstants &cc);

// log Gamma(m + phi) - log Gamma(phi), accurate for very large phi.
double log_pochhammer(double phi, int m);

// Draw from the zero-inflated count law with log mean u.
int sample_count(double u, const TaxonShape &shape, Rng &rng);

} // namespace zimed

#endif
