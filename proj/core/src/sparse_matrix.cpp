#include "gahne/sparse_matrix.hpp"

#include <algorithm>
#include <string>

#include "gahne/errors.hpp"

namespace gahne {

SparseMatrix::SparseMatrix(int n_rows, int n_cols, std::vector<int> row_offsets,
                           std::vector<int> col_indices, std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (n_rows_ < 0 || n_cols_ < 0) throw ConfigError("SparseMatrix: negative dimension");
  if (row_offsets_.size() != static_cast<std::size_t>(n_rows_) + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != static_cast<int>(values_.size()) ||
      col_indices_.size() != values_.size()) {
    throw ConfigError("SparseMatrix: inconsistent CSR arrays");
  }
  for (int r = 0; r < n_rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1]) throw ConfigError("SparseMatrix: offsets decrease");
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] < 0 || col_indices_[k] >= n_cols_) {
        throw ConfigError("SparseMatrix: column index out of range");
      }
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
        throw ConfigError("SparseMatrix: columns not strictly increasing in row " +
                          std::to_string(r));
      }
    }
  }
}

double SparseMatrix::row_sum(int r) const {
  double total = 0.0;
  for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) total += values_[k];
  return total;
}

SparseMatrix csr_from_edges(const std::vector<std::pair<int, int>>& edges, int n_rows,
                            int n_cols, bool symmetrize) {
  std::vector<std::pair<int, int>> entries;
  entries.reserve(edges.size() * (symmetrize ? 2 : 1));
  for (const auto& [r, c] : edges) {
    if (r < 0 || r >= n_rows || c < 0 || c >= n_cols) {
      throw ConfigError("csr_from_edges: index out of range: (" + std::to_string(r) + ", " +
                        std::to_string(c) + ")");
    }
    entries.emplace_back(r, c);
    if (symmetrize) entries.emplace_back(c, r);
  }
  std::sort(entries.begin(), entries.end());

  std::vector<int> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
  std::vector<int> cols;
  std::vector<double> values;
  cols.reserve(entries.size());
  values.reserve(entries.size());
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    double weight = 0.0;
    while (j < entries.size() && entries[j] == entries[i]) {
      weight += 1.0;
      ++j;
    }
    cols.push_back(entries[i].second);
    values.push_back(weight);
    offsets[entries[i].first + 1] += 1;
    i = j;
  }
  for (int r = 0; r < n_rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(values));
}

SparseMatrix row_normalize(const SparseMatrix& a) {
  for (double v : a.values()) {
    if (v < 0.0) throw ConfigError("row_normalize: negative value");
  }
  std::vector<double> values = a.values();
  for (int r = 0; r < a.rows(); ++r) {
    const double degree = a.row_sum(r);
    if (degree == 0.0) continue;  // zero-degree rows stay all-zero
    for (int k = a.row_offsets()[r]; k < a.row_offsets()[r + 1]; ++k) values[k] /= degree;
  }
  return SparseMatrix(a.rows(), a.cols(), a.row_offsets(), a.col_indices(), std::move(values));
}

DenseMatrix spmm(const SparseMatrix& p, const DenseMatrix& x) {
  if (p.cols() != x.rows()) throw ConfigError("spmm: dimension mismatch");
  DenseMatrix y(p.rows(), x.cols());
  const int n = x.cols();
  for (int i = 0; i < p.rows(); ++i) {
    double* yrow = y.row(i);
    for (int k = p.row_offsets()[i]; k < p.row_offsets()[i + 1]; ++k) {
      const double v = p.values()[k];
      const double* xrow = x.row(p.col_indices()[k]);
      for (int j = 0; j < n; ++j) yrow[j] += v * xrow[j];
    }
  }
  return y;
}

DenseMatrix spmm_transposed(const SparseMatrix& p, const DenseMatrix& x) {
  if (p.rows() != x.rows()) throw ConfigError("spmm_transposed: dimension mismatch");
  DenseMatrix y(p.cols(), x.cols());
  const int n = x.cols();
  for (int i = 0; i < p.rows(); ++i) {
    const double* xrow = x.row(i);
    for (int k = p.row_offsets()[i]; k < p.row_offsets()[i + 1]; ++k) {
      double* yrow = y.row(p.col_indices()[k]);
      const double v = p.values()[k];
      for (int j = 0; j < n; ++j) yrow[j] += v * xrow[j];
    }
  }
  return y;
}

}  // namespace gahne
