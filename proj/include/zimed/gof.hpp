#ifndef ZIMED_GOF_HPP
#define ZIMED_GOF_HPP

#include "zimed/data.hpp"
#include "zimed/mediator.hpp"

#include <string>
#include <vector>

namespace zimed {

struct GofCell {
  int lower = 0;
  int upper = -1; // inclusive; -1 means unbounded
  double observed = 0.0;
  double expected = 0.0;
};

struct TaxonGof {
  std::string taxon;
  std::vector<GofCell> cells;
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool pass = false; // p_value >= alpha
  std::string error; // set instead of the statistics when the test fails
};

struct GofReport {
  double alpha = 0.05;
  std::vector<TaxonGof> taxa;
};

// Six-cell chi-square test for one taxon. Cell 1 is {0}; the positive range is
// cut at the fitted quintiles of the pooled positive-count distribution.
// Expected counts sum the per-subject fitted masses with delta integrated over
// N(0, sigma_delta^2). Cells with expected < 5 are merged rightward (the last
// leftward). df = cells - 1 - (zero-inflation + dispersion parameters), at
// least 1. Throws DataError("DegenerateCells") with fewer than 3 cells.
TaxonGof goodness_of_fit_taxon(const MediatorFit &fit, const Dataset &data,
                               int j, double alpha = 0.05);

// All taxa; a DegenerateCells taxon is reported with its error string.
GofReport goodness_of_fit(const MediatorFit &fit, const Dataset &data,
                          double alpha = 0.05);

} // namespace zimed

#endif
