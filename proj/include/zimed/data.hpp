#ifndef ZIMED_DATA_HPP
#define ZIMED_DATA_HPP

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace zimed {

using CountMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// One analysis dataset. Exposure is coded 0 (reference a*) / 1 (exposed a).
//  c1: exposure-outcome confounders (enter the exposure model)
//  c2: exposure-mediator confounders (enter the mediator mean)
//  c3: outcome covariates (optional; unused by default)
struct Dataset {
  std::vector<std::string> subject_id;
  Eigen::VectorXi exposure;
  Eigen::MatrixXd c1;
  Eigen::MatrixXd c2;
  Eigen::MatrixXd c3;
  CountMatrix mediators; // n x p raw counts
  Eigen::VectorXd offset;  // sequencing depth, > 0
  Eigen::VectorXd outcome;

  std::vector<std::string> taxon_names;
  std::vector<std::string> c1_names, c2_names, c3_names;

  int n() const { return static_cast<int>(outcome.size()); }
  int p() const { return static_cast<int>(mediators.cols()); }
  int r1() const { return static_cast<int>(c1.cols()); }
  int r2() const { return static_cast<int>(c2.cols()); }
  int r3() const { return static_cast<int>(c3.cols()); }

  // Rows idx (with repetition allowed) in the given order.
  Dataset subset(const std::vector<int> &idx) const;
};

struct DatasetSummary {
  int n = 0;
  int p = 0;
  std::vector<double> zero_proportion; // per taxon, exact (#zeros)/n
  double offset_min = 0.0;
  double offset_max = 0.0;
};

DatasetSummary summarize(const Dataset &data);

// Maps CSV columns to dataset roles.
struct ColumnSchema {
  std::string id;
  std::string exposure;
  std::vector<std::string> c1;
  std::vector<std::string> c2;
  std::vector<std::string> c3;
  std::vector<std::string> mediators;
  // Used when `mediators` is empty: every column with this prefix.
  std::string mediator_prefix;
  std::optional<std::string> offset; // absent => offset 1 for every subject
  std::string outcome;
};

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string &name) const; // -1 when absent
};

RawTable read_csv(const std::string &path);
RawTable parse_csv(const std::string &text);

// Builds a Dataset from string cells, enforcing every invariant. Throws
// DataError with codes NonIntegerCount, MissingValue, ConstantExposure,
// NonPositiveOffset, BadExposure, UnknownColumn.
Dataset validate_dataset(const RawTable &table, const ColumnSchema &schema);

// Re-checks an in-memory dataset; returns an identical copy when valid.
Dataset validate_dataset(const Dataset &data);

// Writes the dataset back out in a layout `default_schema` reads.
void write_dataset_csv(const Dataset &data, const std::string &path);
ColumnSchema default_schema(const Dataset &data);

// Packed mediator-model parameters. Layout of the packed vector:
//   [beta_z0 (p) | beta_l0 (p) | beta_0 (p) | beta_1 (p) |
//    beta_2 column 0 (p) | ... | beta_2 column r2-1 (p) | sigma_delta]
// so P = (4 + r2) p + 1, i.e. 5p + 1 for scalar C2.
struct ThetaVector {
  Eigen::VectorXd beta_z0;
  Eigen::VectorXd beta_l0;
  Eigen::VectorXd beta_0;
  Eigen::VectorXd beta_1;
  Eigen::MatrixXd beta_2; // p x r2
  double sigma_delta = 0.0;

  int p() const { return static_cast<int>(beta_0.size()); }
  int r2() const { return static_cast<int>(beta_2.cols()); }
  int size() const { return packed_size(p(), r2()); }

  static int packed_size(int p, int r2) { return (4 + r2) * p + 1; }
  static ThetaVector zeros(int p, int r2);
};

Eigen::VectorXd pack_theta(const ThetaVector &theta);
// Throws DataError("LengthMismatch") when v.size() != (4 + r2) p + 1.
ThetaVector unpack_theta(const Eigen::VectorXd &v, int p, int r2 = 1);

// Index helpers into the packed layout.
namespace layout {
inline int z0(int /*p*/, int j) { return j; }
inline int l0(int p, int j) { return p + j; }
inline int b0(int p, int j) { return 2 * p + j; }
inline int b1(int p, int j) { return 3 * p + j; }
inline int b2(int p, int j, int k) { return (4 + k) * p + j; }
inline int sigma(int p, int r2) { return (4 + r2) * p; }
} // namespace layout

} // namespace zimed

#endif
