#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sscdr/errors.hpp"

namespace sscdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

//! Column-normalized data matrix. Every column of `values` has unit
//! Euclidean norm; `original_norms[i]` is the norm the column had before
//! normalization.
struct NormalizedDataMatrix {
  Matrix values;
  Vector original_norms;

  Eigen::Index d() const { return values.rows(); }
  Eigen::Index N() const { return values.cols(); }
};

//! Cluster assignment for N points with k clusters. Every label lies in
//! [0, k) and every cluster index occurs at least once.
struct Labels {
  std::vector<int> assignments;
  int k = 0;

  Labels() = default;
  Labels(std::vector<int> a, int k_) : assignments(std::move(a)), k(k_) {
    if (k <= 0) throw BadParameter("Labels: k must be positive");
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int v : assignments) {
      if (v < 0 || v >= k) throw BadParameter("Labels: index outside [0,k)");
      seen[static_cast<std::size_t>(v)] = true;
    }
    for (int c = 0; c < k; ++c)
      if (!seen[static_cast<std::size_t>(c)])
        throw BadParameter("Labels: cluster " + std::to_string(c) + " is empty");
  }

  std::size_t size() const { return assignments.size(); }
};

//! Sparse N x N self-representation matrix C with an identically zero
//! diagonal. Columns are stored as (row index, value) pairs sorted by row.
class SelfRepresentation {
 public:
  using Entry = std::pair<int, double>;

  explicit SelfRepresentation(Eigen::Index n) : n_(n), cols_(static_cast<std::size_t>(n)) {
    if (n < 1) throw BadDimensions("SelfRepresentation: N must be >= 1");
  }

  Eigen::Index size() const { return n_; }

  //! Replace column i. Entries on the diagonal or out of range are
  //! rejected; duplicates are rejected; entries are stored sorted.
  void set_column(Eigen::Index i, std::vector<Entry> entries) {
    check_col(i);
    std::sort(entries.begin(), entries.end());
    int prev = -1;
    for (const auto& [row, value] : entries) {
      if (row < 0 || row >= n_) throw BadDimensions("SelfRepresentation: row out of range");
      if (row == i) throw BadParameter("SelfRepresentation: nonzero diagonal entry");
      if (row == prev) throw BadParameter("SelfRepresentation: duplicate row in column");
      prev = row;
      (void)value;
    }
    cols_[static_cast<std::size_t>(i)] = std::move(entries);
  }

  const std::vector<Entry>& column(Eigen::Index i) const {
    check_col(i);
    return cols_[static_cast<std::size_t>(i)];
  }

  Matrix dense() const {
    Matrix out = Matrix::Zero(n_, n_);
    for (Eigen::Index j = 0; j < n_; ++j)
      for (const auto& [row, value] : cols_[static_cast<std::size_t>(j)]) out(row, j) = value;
    return out;
  }

 private:
  void check_col(Eigen::Index i) const {
    if (i < 0 || i >= n_) throw BadDimensions("SelfRepresentation: column out of range");
  }

  Eigen::Index n_;
  std::vector<std::vector<Entry>> cols_;
};

//! One orthonormal basis per cluster; bases[l] is d x r_l.
struct SubspaceEnsemble {
  std::vector<Matrix> bases;

  Eigen::Index k() const { return static_cast<Eigen::Index>(bases.size()); }
};

inline constexpr double kZeroColumnTol = 1e-12;

namespace detail {

inline void check_orthonormal(const Matrix& basis, double tol = 1e-8) {
  Matrix gram = basis.transpose() * basis;
  gram.diagonal().array() -= 1.0;
  if (gram.cwiseAbs().maxCoeff() > tol) throw NotOrthonormal("basis columns are not orthonormal");
}

}  // namespace detail

//! Scale every column to unit Euclidean norm.
inline NormalizedDataMatrix normalize_columns(const Matrix& X) {
  NormalizedDataMatrix out;
  out.values = X;
  out.original_norms = Vector(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double norm = X.col(j).norm();
    if (norm < kZeroColumnTol) throw ZeroColumn(static_cast<int>(j));
    out.values.col(j) /= norm;
    out.original_norms[j] = norm;
  }
  return out;
}

namespace detail {

//! Round-trip-safe decimal formatting (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token, int row, int col) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  double value = 0.0;
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end) throw ParseError(row, col, token);
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

//! Load a dense matrix from a comma-separated file, one matrix row per
//! line. With skip_header the first line is ignored.
inline Matrix load_csv(const std::string& path, bool skip_header = false) {
  auto lines = detail::read_lines(path);
  std::size_t first = skip_header ? 1 : 0;
  std::vector<std::vector<double>> rows;
  for (std::size_t li = first; li < lines.size(); ++li) {
    if (lines[li].empty() && li + 1 == lines.size()) break;  // trailing newline
    auto fields = detail::split_csv_line(lines[li]);
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      row.push_back(detail::parse_double(fields[c], static_cast<int>(li + 1), static_cast<int>(c + 1)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw RaggedRows(static_cast<int>(li + 1), row.size(), rows.front().size());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("empty matrix file: " + path);
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!X.allFinite()) throw Error("non-finite entries in " + path);
  return X;
}

inline void save_csv(const Matrix& X, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (j) out << ',';
      out << detail::format_double(X(i, j));
    }
    out << '\n';
  }
}

//! One integer label per line.
inline void save_labels(const Labels& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  for (int v : labels.assignments) out << v << '\n';
}

inline Labels load_labels(const std::string& path) {
  auto lines = detail::read_lines(path);
  std::vector<int> values;
  int maxv = -1;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    int v = 0;
    auto res = std::from_chars(lines[li].data(), lines[li].data() + lines[li].size(), v);
    if (res.ec != std::errc()) throw ParseError(static_cast<int>(li + 1), 1, lines[li]);
    values.push_back(v);
    maxv = std::max(maxv, v);
  }
  if (values.empty()) throw Error("empty label file: " + path);
  return Labels(std::move(values), maxv + 1);
}

//! Triplet CSV with header "i,j,v"; one line per stored nonzero.
inline void save_sparse(const SelfRepresentation& C, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << "i,j,v\n";
  for (Eigen::Index j = 0; j < C.size(); ++j)
    for (const auto& [row, value] : C.column(j))
      out << row << ',' << j << ',' << detail::format_double(value) << '\n';
}

inline SelfRepresentation load_sparse(const std::string& path, Eigen::Index n) {
  auto lines = detail::read_lines(path);
  if (lines.empty() || lines.front() != "i,j,v")
    throw ParseError(1, 1, lines.empty() ? std::string() : lines.front());
  std::vector<std::vector<SelfRepresentation::Entry>> cols(static_cast<std::size_t>(n));
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto fields = detail::split_csv_line(lines[li]);
    if (fields.size() != 3) throw RaggedRows(static_cast<int>(li + 1), fields.size(), 3);
    int i = static_cast<int>(detail::parse_double(fields[0], static_cast<int>(li + 1), 1));
    int j = static_cast<int>(detail::parse_double(fields[1], static_cast<int>(li + 1), 2));
    double v = detail::parse_double(fields[2], static_cast<int>(li + 1), 3);
    if (j < 0 || j >= n) throw BadDimensions("sparse load: column out of range");
    cols[static_cast<std::size_t>(j)].emplace_back(i, v);
  }
  SelfRepresentation C(n);
  for (Eigen::Index j = 0; j < n; ++j) C.set_column(j, std::move(cols[static_cast<std::size_t>(j)]));
  return C;
}

}  // namespace sscdr
