#pragma once

// Dataset container, CSV ingestion and column statistics.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mls/common.hpp"

namespace mls {

/// n x d matrix of finite reals with unique feature names and optional 0/1 labels
/// (1 marks the minority class).
class Dataset {
 public:
  Dataset() = default;

  Dataset(Matrix values, std::vector<std::string> names,
          std::optional<std::vector<int>> labels = std::nullopt)
      : values_(std::move(values)), names_(std::move(names)), labels_(std::move(labels)) {
    validate();
  }

  /// Builds a dataset with generated names "f0", "f1", ...
  static Dataset from_matrix(Matrix values, std::optional<std::vector<int>> labels = std::nullopt) {
    std::vector<std::string> names;
    names.reserve(static_cast<size_t>(values.cols()));
    for (Index r = 0; r < values.cols(); ++r) names.push_back("f" + std::to_string(r));
    return Dataset(std::move(values), std::move(names), std::move(labels));
  }

  const Matrix& values() const { return values_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  bool has_labels() const { return labels_.has_value(); }
  Index n_samples() const { return values_.rows(); }
  Index n_features() const { return values_.cols(); }

  Dataset with_values(Matrix values) const { return Dataset(std::move(values), names_, labels_); }
  Dataset with_labels(std::optional<std::vector<int>> labels) const {
    return Dataset(values_, names_, std::move(labels));
  }

 private:
  void validate() const {
    if (values_.rows() < 2) throw DataError("dataset needs at least 2 samples");
    if (values_.cols() < 1) throw DataError("dataset needs at least 1 feature");
    if (static_cast<Index>(names_.size()) != values_.cols())
      throw DataError("feature name count does not match column count");
    std::unordered_set<std::string> seen;
    for (const auto& name : names_)
      if (!seen.insert(name).second) throw DataError("duplicate feature name '" + name + "'");
    for (Index j = 0; j < values_.cols(); ++j)
      for (Index i = 0; i < values_.rows(); ++i)
        if (!std::isfinite(values_(i, j)))
          throw DataError("non-finite value at row " + std::to_string(i) + ", column '" +
                          names_[static_cast<size_t>(j)] + "'");
    if (labels_) {
      if (static_cast<Index>(labels_->size()) != values_.rows())
        throw DataError("label count does not match sample count");
      for (int y : *labels_)
        if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    }
  }

  Matrix values_;
  std::vector<std::string> names_;
  std::optional<std::vector<int>> labels_;
};

/// Per-column statistics from standardize(); constant columns have std_devs == 0.
struct ScalerStats {
  Vector means;
  Vector std_devs;
  std::vector<bool> constant;
};

/// Sample variance with divisor n - 1.
inline double variance(const Eigen::Ref<const Vector>& f) {
  const Index n = f.size();
  if (n < 2) throw DataError("variance needs at least 2 values");
  const double mean = f.mean();
  double ss = 0.0;
  for (Index i = 0; i < n; ++i) ss += (f[i] - mean) * (f[i] - mean);
  return ss / static_cast<double>(n - 1);
}

/// Column-wise z-scoring with the n - 1 divisor. Constant columns become zero and are flagged.
inline std::pair<Dataset, ScalerStats> standardize(const Dataset& ds) {
  const Index n = ds.n_samples();
  const Index d = ds.n_features();
  ScalerStats stats{Vector(d), Vector(d), std::vector<bool>(static_cast<size_t>(d), false)};
  Matrix out(n, d);
  for (Index r = 0; r < d; ++r) {
    const auto col = ds.values().col(r);
    const double mean = col.mean();
    const double sd = std::sqrt(variance(col));
    stats.means[r] = mean;
    const bool is_const = col.maxCoeff() == col.minCoeff() || !(sd > 0.0);
    if (is_const) {
      stats.std_devs[r] = 0.0;
      stats.constant[static_cast<size_t>(r)] = true;
      out.col(r).setZero();
    } else {
      stats.std_devs[r] = sd;
      out.col(r) = (col.array() - mean) / sd;
    }
  }
  return {ds.with_values(std::move(out)), std::move(stats)};
}

/// True for columns whose values are all identical.
inline std::vector<bool> constant_columns(const Matrix& x) {
  std::vector<bool> flags(static_cast<size_t>(x.cols()));
  for (Index r = 0; r < x.cols(); ++r)
    flags[static_cast<size_t>(r)] = x.col(r).maxCoeff() == x.col(r).minCoeff();
  return flags;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    const auto cell = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    std::string s(cell);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    cells.push_back(std::move(s));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a header-first, comma-separated file. When label_column is given, that
/// column is removed from the features and must hold only 0/1.
inline Dataset load_csv(const std::string& path, const std::optional<std::string>& label_column = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  const auto header = detail::split_csv_line(line);
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : header)
      if (!seen.insert(h).second) throw DataError("duplicate header name '" + h + "'");
  }
  std::optional<size_t> label_idx;
  if (label_column) {
    const auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end()) throw DataError("label column '" + *label_column + "' not found");
    label_idx = static_cast<size_t>(it - header.begin());
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(header.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      const auto v = detail::parse_real(cells[c]);
      const std::string where = "row " + std::to_string(rows.size()) + " (line " + std::to_string(line_no) +
                                "), column '" + header[c] + "'";
      if (label_idx && c == *label_idx) {
        if (!v || (*v != 0.0 && *v != 1.0))
          throw DataError("label value '" + cells[c] + "' outside {0,1} at " + where);
        labels.push_back(static_cast<int>(*v));
        continue;
      }
      if (!v) throw DataError("non-numeric or non-finite cell '" + cells[c] + "' at " + where);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw DataError("'" + path + "' needs at least 2 data rows");

  std::vector<std::string> names;
  for (size_t c = 0; c < header.size(); ++c)
    if (!label_idx || c != *label_idx) names.push_back(header[c]);
  if (names.empty()) throw DataError("'" + path + "' has no feature columns");

  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < names.size(); ++j) x(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  std::optional<std::vector<int>> lab;
  if (label_idx) lab = std::move(labels);
  return Dataset(std::move(x), std::move(names), std::move(lab));
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Writes features (and labels, as the last column named label_column) so that
/// load_csv reproduces the dataset exactly.
inline void write_csv(const Dataset& ds, const std::string& path, const std::string& label_column = "label") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  const auto& names = ds.feature_names();
  for (size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  if (ds.has_labels()) out << ',' << label_column;
  out << '\n';
  for (Index i = 0; i < ds.n_samples(); ++i) {
    for (Index j = 0; j < ds.n_features(); ++j) out << (j ? "," : "") << format_real(ds.values()(i, j));
    if (ds.has_labels()) out << ',' << (*ds.labels())[static_cast<size_t>(i)];
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace mls
