#pragma once

#include <cstddef>
#include <vector>

namespace gahne {

// Row-major dense matrix of 64-bit floats. Plain storage; shape rules are
// enforced by the operations that combine matrices.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int n_rows, int n_cols);  // zero-filled
  DenseMatrix(int n_rows, int n_cols, std::vector<double> data);

  static DenseMatrix identity(int n);
  static DenseMatrix constant(int n_rows, int n_cols, double value);

  int rows() const { return n_rows_; }
  int cols() const { return n_cols_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * n_cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * n_cols_ + c]; }
  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * n_cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * n_cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const DenseMatrix& other) const {
    return n_rows_ == other.n_rows_ && n_cols_ == other.n_cols_;
  }

 private:
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::vector<double> data_;
};

// C = A * B. Exact-zero multipliers are skipped; per-row accumulation order
// is fixed, so results are reproducible.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// C = A * B^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
// C = A^T * B
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double factor);
DenseMatrix concat_cols(const std::vector<const DenseMatrix*>& parts);
// 1 x n_cols vector of column sums.
DenseMatrix column_sums(const DenseMatrix& a);

void add_in_place(DenseMatrix& target, const DenseMatrix& delta);

bool all_finite(const DenseMatrix& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace gahne
