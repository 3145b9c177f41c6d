#include "gahne/dense_matrix.hpp"

#include <cmath>
#include <string>

#include "gahne/errors.hpp"

namespace gahne {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

DenseMatrix::DenseMatrix(int n_rows, int n_cols)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      data_(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols), 0.0) {
  require(n_rows >= 0 && n_cols >= 0, "DenseMatrix: negative dimension");
}

DenseMatrix::DenseMatrix(int n_rows, int n_cols, std::vector<double> data)
    : n_rows_(n_rows), n_cols_(n_cols), data_(std::move(data)) {
  require(n_rows >= 0 && n_cols >= 0, "DenseMatrix: negative dimension");
  require(data_.size() == static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols),
          "DenseMatrix: data length does not match shape");
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::constant(int n_rows, int n_cols, double value) {
  DenseMatrix m(n_rows, n_cols);
  for (double& x : m.data_) x = value;
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  DenseMatrix c(a.rows(), b.cols());
  const int n = b.cols();
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double v = arow[k];
      if (v == 0.0) continue;
      const double* brow = b.row(k);
      for (int j = 0; j < n; ++j) crow[j] += v * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions disagree");
  DenseMatrix c(a.rows(), b.rows());
  const int inner = a.cols();
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int k = 0; k < b.rows(); ++k) {
      const double* brow = b.row(k);
      double acc = 0.0;
      for (int j = 0; j < inner; ++j) acc += arow[j] * brow[j];
      crow[k] = acc;
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: inner dimensions disagree");
  DenseMatrix c(a.cols(), b.cols());
  const int n = b.cols();
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    const double* brow = b.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double v = arow[k];
      if (v == 0.0) continue;
      double* crow = c.row(k);
      for (int j = 0; j < n; ++j) crow[j] += v * brow[j];
    }
  }
  return c;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "add: shape mismatch");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "hadamard: shape mismatch");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
  DenseMatrix c = a;
  for (double& x : c.data()) x *= factor;
  return c;
}

DenseMatrix concat_cols(const std::vector<const DenseMatrix*>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int rows = parts.front()->rows();
  int cols = 0;
  for (const DenseMatrix* p : parts) {
    require(p->rows() == rows, "concat_cols: row counts disagree");
    cols += p->cols();
  }
  DenseMatrix c(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double* crow = c.row(i);
    int offset = 0;
    for (const DenseMatrix* p : parts) {
      const double* prow = p->row(i);
      for (int j = 0; j < p->cols(); ++j) crow[offset + j] = prow[j];
      offset += p->cols();
    }
  }
  return c;
}

DenseMatrix column_sums(const DenseMatrix& a) {
  DenseMatrix c(1, a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    for (int j = 0; j < a.cols(); ++j) c.at(0, j) += arow[j];
  }
  return c;
}

void add_in_place(DenseMatrix& target, const DenseMatrix& delta) {
  require(target.same_shape(delta), "add_in_place: shape mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) target.data()[i] += delta.data()[i];
}

bool all_finite(const DenseMatrix& a) {
  for (double x : a.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace gahne
