#include "zimed/data.hpp"
#include "zimed/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zimed {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string &cell) {
  const auto t = trim(cell);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "null";
}

double parse_real(const std::string &cell, const std::string &col, int row) {
  if (is_missing(cell))
    throw DataError("MissingValue", "column '" + col + "', row " +
                                        std::to_string(row + 1));
  const auto t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw DataError("MissingValue", "column '" + col + "', row " +
                                        std::to_string(row + 1) +
                                        ": not a finite number '" + t + "'");
  return v;
}

std::vector<std::string> split_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void check_counts(const CountMatrix &m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m(i, j) < 0)
        throw DataError("NonIntegerCount",
                        "negative count at row " + std::to_string(i + 1) +
                            ", taxon " + std::to_string(j + 1));
}

} // namespace

int RawTable::column(const std::string &name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

RawTable parse_csv(const std::string &text) {
  RawTable t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty())
      continue;
    auto cells = split_line(line);
    if (!have_header) {
      for (auto &c : cells)
        c = trim(c);
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError("RaggedRow", "row " + std::to_string(t.rows.size() + 1) +
                                       " has " + std::to_string(cells.size()) +
                                       " cells, header has " +
                                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header)
    throw DataError("EmptyTable", "no header row");
  return t;
}

RawTable read_csv(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IOError("OpenFailed", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

Dataset validate_dataset(const RawTable &table, const ColumnSchema &schema) {
  auto col = [&](const std::string &name) {
    const int c = table.column(name);
    if (c < 0)
      throw DataError("UnknownColumn", "column '" + name + "' not in header");
    return c;
  };

  std::vector<std::string> med_cols = schema.mediators;
  if (med_cols.empty() && !schema.mediator_prefix.empty())
    for (const auto &h : table.header)
      if (h.rfind(schema.mediator_prefix, 0) == 0)
        med_cols.push_back(h);
  if (med_cols.empty())
    throw DataError("NoMediators", "schema selects no mediator columns");

  const int n = static_cast<int>(table.rows.size());
  const int p = static_cast<int>(med_cols.size());
  Dataset d;
  d.subject_id.resize(n);
  d.exposure.resize(n);
  d.c1.resize(n, static_cast<int>(schema.c1.size()));
  d.c2.resize(n, static_cast<int>(schema.c2.size()));
  d.c3.resize(n, static_cast<int>(schema.c3.size()));
  d.mediators.resize(n, p);
  d.offset.resize(n);
  d.outcome.resize(n);
  d.taxon_names = med_cols;
  d.c1_names = schema.c1;
  d.c2_names = schema.c2;
  d.c3_names = schema.c3;

  const int id_c = schema.id.empty() ? -1 : col(schema.id);
  const int a_c = col(schema.exposure);
  const int y_c = col(schema.outcome);
  const int z_c = schema.offset ? col(*schema.offset) : -1;
  auto fill = [&](Eigen::MatrixXd &m, const std::vector<std::string> &names) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      const int c = col(names[k]);
      for (int i = 0; i < n; ++i)
        m(i, static_cast<int>(k)) = parse_real(table.rows[i][c], names[k], i);
    }
  };
  fill(d.c1, schema.c1);
  fill(d.c2, schema.c2);
  fill(d.c3, schema.c3);

  for (int i = 0; i < n; ++i) {
    const auto &row = table.rows[i];
    d.subject_id[i] = id_c >= 0 ? trim(row[id_c]) : std::to_string(i + 1);
    const double a = parse_real(row[a_c], schema.exposure, i);
    if (a != 0.0 && a != 1.0)
      throw DataError("BadExposure", "exposure must be 0 or 1 (row " +
                                         std::to_string(i + 1) + ")");
    d.exposure(i) = static_cast<int>(a);
    d.outcome(i) = parse_real(row[y_c], schema.outcome, i);
    d.offset(i) = z_c >= 0 ? parse_real(row[z_c], *schema.offset, i) : 1.0;
    for (int j = 0; j < p; ++j) {
      const auto &name = med_cols[j];
      const auto &cell = row[col(name)];
      const double v = parse_real(cell, name, i);
      if (v < 0.0 || v != std::floor(v) || v > 2.0e9)
        throw DataError("NonIntegerCount",
                        "taxon '" + name + "', row " + std::to_string(i + 1) +
                            ": '" + trim(cell) + "'");
      d.mediators(i, j) = static_cast<int>(v);
    }
  }
  return validate_dataset(d);
}

Dataset validate_dataset(const Dataset &data) {
  const int n = data.n();
  if (n == 0)
    throw DataError("EmptyTable", "dataset has no rows");
  auto rows_ok = [n](Eigen::Index r) { return r == n; };
  if (!rows_ok(data.exposure.size()) || !rows_ok(data.c1.rows()) ||
      !rows_ok(data.c2.rows()) || !rows_ok(data.c3.rows()) ||
      !rows_ok(data.mediators.rows()) || !rows_ok(data.offset.size()) ||
      static_cast<int>(data.subject_id.size()) != n)
    throw DataError("LengthMismatch", "row counts disagree across fields");
  if (static_cast<int>(data.taxon_names.size()) != data.p())
    throw DataError("LengthMismatch", "taxon name count != mediator columns");

  check_counts(data.mediators);
  auto finite = [](const auto &m) { return m.array().isFinite().all(); };
  if (!finite(data.c1) || !finite(data.c2) || !finite(data.c3) ||
      !finite(data.outcome) || !finite(data.offset))
    throw DataError("MissingValue", "non-finite value in dataset");
  for (int i = 0; i < n; ++i) {
    if (data.offset(i) <= 0.0)
      throw DataError("NonPositiveOffset",
                      "offset must be > 0 (row " + std::to_string(i + 1) + ")");
    if (data.exposure(i) != 0 && data.exposure(i) != 1)
      throw DataError("BadExposure", "exposure must be 0 or 1");
  }
  const int exposed = data.exposure.sum();
  if (exposed == 0 || exposed == n)
    throw DataError("ConstantExposure", "exposure has a single level");
  return data;
}

Dataset Dataset::subset(const std::vector<int> &idx) const {
  Dataset d;
  const int m = static_cast<int>(idx.size());
  d.subject_id.resize(m);
  d.exposure.resize(m);
  d.c1.resize(m, c1.cols());
  d.c2.resize(m, c2.cols());
  d.c3.resize(m, c3.cols());
  d.mediators.resize(m, mediators.cols());
  d.offset.resize(m);
  d.outcome.resize(m);
  for (int r = 0; r < m; ++r) {
    const int i = idx[r];
    d.subject_id[r] = subject_id[i];
    d.exposure(r) = exposure(i);
    d.c1.row(r) = c1.row(i);
    d.c2.row(r) = c2.row(i);
    d.c3.row(r) = c3.row(i);
    d.mediators.row(r) = mediators.row(i);
    d.offset(r) = offset(i);
    d.outcome(r) = outcome(i);
  }
  d.taxon_names = taxon_names;
  d.c1_names = c1_names;
  d.c2_names = c2_names;
  d.c3_names = c3_names;
  return d;
}

DatasetSummary summarize(const Dataset &data) {
  DatasetSummary s;
  s.n = data.n();
  s.p = data.p();
  s.zero_proportion.resize(s.p);
  for (int j = 0; j < s.p; ++j) {
    const auto zeros = (data.mediators.col(j).array() == 0).count();
    s.zero_proportion[j] = static_cast<double>(zeros) / s.n;
  }
  s.offset_min = data.offset.minCoeff();
  s.offset_max = data.offset.maxCoeff();
  return s;
}

ColumnSchema default_schema(const Dataset &data) {
  ColumnSchema s;
  s.id = "id";
  s.exposure = "exposure";
  s.outcome = "outcome";
  s.offset = "offset";
  s.c1 = data.c1_names;
  s.c2 = data.c2_names;
  s.c3 = data.c3_names;
  s.mediators = data.taxon_names;
  return s;
}

void write_dataset_csv(const Dataset &data, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IOError("OpenFailed", "cannot write '" + path + "'");
  out.precision(17);
  out << "id,exposure";
  for (const auto &c : data.c1_names)
    out << ',' << c;
  for (const auto &c : data.c2_names)
    out << ',' << c;
  for (const auto &c : data.c3_names)
    out << ',' << c;
  for (const auto &t : data.taxon_names)
    out << ',' << t;
  out << ",offset,outcome\n";
  for (int i = 0; i < data.n(); ++i) {
    out << data.subject_id[i] << ',' << data.exposure(i);
    for (int k = 0; k < data.r1(); ++k)
      out << ',' << data.c1(i, k);
    for (int k = 0; k < data.r2(); ++k)
      out << ',' << data.c2(i, k);
    for (int k = 0; k < data.r3(); ++k)
      out << ',' << data.c3(i, k);
    for (int j = 0; j < data.p(); ++j)
      out << ',' << data.mediators(i, j);
    out << ',' << data.offset(i) << ',' << data.outcome(i) << '\n';
  }
}

ThetaVector ThetaVector::zeros(int p, int r2) {
  ThetaVector t;
  t.beta_z0 = Eigen::VectorXd::Zero(p);
  t.beta_l0 = Eigen::VectorXd::Zero(p);
  t.beta_0 = Eigen::VectorXd::Zero(p);
  t.beta_1 = Eigen::VectorXd::Zero(p);
  t.beta_2 = Eigen::MatrixXd::Zero(p, r2);
  t.sigma_delta = 0.0;
  return t;
}

Eigen::VectorXd pack_theta(const ThetaVector &theta) {
  const int p = theta.p();
  const int r2 = theta.r2();
  if (theta.beta_z0.size() != p || theta.beta_l0.size() != p ||
      theta.beta_1.size() != p || theta.beta_2.rows() != p)
    throw DataError("LengthMismatch", "theta blocks disagree on p");
  Eigen::VectorXd v(ThetaVector::packed_size(p, r2));
  v.segment(0, p) = theta.beta_z0;
  v.segment(p, p) = theta.beta_l0;
  v.segment(2 * p, p) = theta.beta_0;
  v.segment(3 * p, p) = theta.beta_1;
  for (int k = 0; k < r2; ++k)
    v.segment((4 + k) * p, p) = theta.beta_2.col(k);
  v(layout::sigma(p, r2)) = theta.sigma_delta;
  return v;
}

ThetaVector unpack_theta(const Eigen::VectorXd &v, int p, int r2) {
  if (p < 1 || r2 < 0 || v.size() != ThetaVector::packed_size(p, r2))
    throw DataError("LengthMismatch",
                    "packed length " + std::to_string(v.size()) +
                        " does not match p=" + std::to_string(p) +
                        ", r2=" + std::to_string(r2));
  ThetaVector t;
  t.beta_z0 = v.segment(0, p);
  t.beta_l0 = v.segment(p, p);
  t.beta_0 = v.segment(2 * p, p);
  t.beta_1 = v.segment(3 * p, p);
  t.beta_2.resize(p, r2);
  for (int k = 0; k < r2; ++k)
    t.beta_2.col(k) = v.segment((4 + k) * p, p);
  t.sigma_delta = v(layout::sigma(p, r2));
  return t;
}

} // namespace zimed
