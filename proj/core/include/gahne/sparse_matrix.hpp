#pragma once

#include <utility>
#include <vector>

#include "gahne/dense_matrix.hpp"

namespace gahne {

// Compressed sparse row matrix in canonical form: row offsets nondecreasing,
// column indices strictly increasing within each row, duplicates coalesced.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int n_rows, int n_cols, std::vector<int> row_offsets,
               std::vector<int> col_indices, std::vector<double> values);

  int rows() const { return n_rows_; }
  int cols() const { return n_cols_; }
  int nnz() const { return static_cast<int>(values_.size()); }

  const std::vector<int>& row_offsets() const { return row_offsets_; }
  const std::vector<int>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  double row_sum(int r) const;

 private:
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::vector<int> row_offsets_ = {0};
  std::vector<int> col_indices_;
  std::vector<double> values_;
};

// Builds canonical CSR from (row, col) pairs; every occurrence contributes
// 1.0 and duplicates coalesce by summation. symmetrize additionally inserts
// (col, row) for every pair.
SparseMatrix csr_from_edges(const std::vector<std::pair<int, int>>& edges, int n_rows,
                            int n_cols, bool symmetrize);

// P = D^{-1} A with D the diagonal of row sums. Zero-degree rows stay
// all-zero. Requires nonnegative values.
SparseMatrix row_normalize(const SparseMatrix& a);

// Exact sparse-dense product P * X.
DenseMatrix spmm(const SparseMatrix& p, const DenseMatrix& x);

// P^T * X, computed by row scatter (no transpose is materialized).
DenseMatrix spmm_transposed(const SparseMatrix& p, const DenseMatrix& x);

}  // namespace gahne
