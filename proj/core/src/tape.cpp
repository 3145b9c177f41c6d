#include "gahne/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gahne/errors.hpp"

namespace gahne {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

int Tape::check_id(int id) const {
  require(id >= 0 && id < size(), "tape: node id out of range");
  return id;
}

int Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return size() - 1;
}

double Tape::scalar_value(int id) const {
  const DenseMatrix& v = value(id);
  require(v.rows() == 1 && v.cols() == 1, "tape: node is not scalar");
  return v.at(0, 0);
}

int Tape::input(DenseMatrix value) {
  Node n;
  n.kind = OpKind::kInput;
  n.value = std::move(value);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  const DenseMatrix& va = value(a);
  const DenseMatrix& vb = value(b);
  require(va.cols() == vb.rows(), "matmul: inner dimensions disagree");
  Node n;
  n.kind = OpKind::kMatmul;
  n.parents = {a, b};
  n.value = gahne::matmul(va, vb);
  return push(std::move(n));
}

int Tape::spmm_const(const SparseMatrix& op, int x) {
  const DenseMatrix& vx = value(x);
  require(op.cols() == vx.rows(), "spmm_const: operator columns must match input rows");
  Node n;
  n.kind = OpKind::kSpmmConst;
  n.parents = {x};
  n.sparse = &op;
  n.value = spmm(op, vx);
  return push(std::move(n));
}

int Tape::add_bias_row(int x, int bias) {
  const DenseMatrix& vx = value(x);
  const DenseMatrix& vb = value(bias);
  require(vb.rows() == 1 && vb.cols() == vx.cols(), "add_bias_row: bias must be 1 x cols");
  Node n;
  n.kind = OpKind::kAddBiasRow;
  n.parents = {x, bias};
  n.value = vx;
  for (int i = 0; i < vx.rows(); ++i) {
    double* row = n.value.row(i);
    for (int j = 0; j < vx.cols(); ++j) row[j] += vb.at(0, j);
  }
  return push(std::move(n));
}

int Tape::relu(int x) {
  Node n;
  n.kind = OpKind::kRelu;
  n.parents = {x};
  n.value = value(x);
  for (double& v : n.value.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

int Tape::tanh(int x) {
  Node n;
  n.kind = OpKind::kTanh;
  n.parents = {x};
  n.value = value(x);
  for (double& v : n.value.data()) v = std::tanh(v);
  return push(std::move(n));
}

int Tape::sigmoid(int x) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.parents = {x};
  n.value = value(x);
  for (double& v : n.value.data()) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

int Tape::softmax_rows(int x) {
  Node n;
  n.kind = OpKind::kSoftmaxRows;
  n.parents = {x};
  n.value = value(x);
  // Row max is subtracted before exponentiation so large logits cannot
  // overflow.
  for (int i = 0; i < n.value.rows(); ++i) {
    double* row = n.value.row(i);
    double hi = row[0];
    for (int j = 1; j < n.value.cols(); ++j) hi = std::max(hi, row[j]);
    double total = 0.0;
    for (int j = 0; j < n.value.cols(); ++j) {
      row[j] = std::exp(row[j] - hi);
      total += row[j];
    }
    for (int j = 0; j < n.value.cols(); ++j) row[j] /= total;
  }
  return push(std::move(n));
}

int Tape::elemwise_mul(int a, int b) {
  require(value(a).same_shape(value(b)), "elemwise_mul: shape mismatch");
  Node n;
  n.kind = OpKind::kElemwiseMul;
  n.parents = {a, b};
  n.value = hadamard(value(a), value(b));
  return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  std::vector<const DenseMatrix*> views;
  views.reserve(parts.size());
  for (int p : parts) views.push_back(&value(p));
  Node n;
  n.kind = OpKind::kConcatCols;
  n.parents = parts;
  n.value = gahne::concat_cols(views);
  return push(std::move(n));
}

int Tape::mean_of_set(const std::vector<int>& parts) {
  require(!parts.empty(), "mean_of_set: no inputs");
  for (int p : parts) {
    require(value(p).same_shape(value(parts.front())), "mean_of_set: shape mismatch");
  }
  Node n;
  n.kind = OpKind::kMeanOfSet;
  n.parents = parts;
  n.value = value(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) add_in_place(n.value, value(parts[i]));
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (double& v : n.value.data()) v *= inv;
  return push(std::move(n));
}

int Tape::scale(int x, double factor) {
  Node n;
  n.kind = OpKind::kScale;
  n.parents = {x};
  n.factor = factor;
  n.value = scaled(value(x), factor);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  require(value(a).same_shape(value(b)), "add: shape mismatch");
  Node n;
  n.kind = OpKind::kAdd;
  n.parents = {a, b};
  n.value = gahne::add(value(a), value(b));
  return push(std::move(n));
}

int Tape::masked_cross_entropy(int probs, const std::vector<int>& node_ids,
                               const std::vector<int>& node_labels) {
  const DenseMatrix& f = value(probs);
  require(!node_ids.empty(), "masked_cross_entropy: empty mask");
  require(node_ids.size() == node_labels.size(), "masked_cross_entropy: ids/labels mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    const int v = node_ids[i];
    const int c = node_labels[i];
    require(v >= 0 && v < f.rows(), "masked_cross_entropy: node id out of range");
    require(c >= 0 && c < f.cols(), "masked_cross_entropy: class id out of range");
    loss -= std::log(std::max(f.at(v, c), kCrossEntropyClamp));
  }
  Node n;
  n.kind = OpKind::kMaskedCrossEntropy;
  n.parents = {probs};
  n.mask_ids = node_ids;
  n.mask_labels = node_labels;
  n.value = DenseMatrix(1, 1, {loss});
  return push(std::move(n));
}

int Tape::sum_all(int x) {
  double total = 0.0;
  for (double v : value(x).data()) total += v;
  Node n;
  n.kind = OpKind::kSumAll;
  n.parents = {x};
  n.value = DenseMatrix(1, 1, {total});
  return push(std::move(n));
}

namespace {

// Ensures grads[id] is materialized before accumulation.
DenseMatrix& grad_slot(GradientMap& grads, const Tape& tape, int id) {
  if (grads[id].empty()) {
    const DenseMatrix& v = tape.value(id);
    grads[id] = DenseMatrix(v.rows(), v.cols());
  }
  return grads[id];
}

}  // namespace

GradientMap Tape::backward(int scalar_id, const std::vector<int>& wanted) const {
  check_id(scalar_id);
  require(value(scalar_id).rows() == 1 && value(scalar_id).cols() == 1,
          "backward: seed node must be 1x1");

  // A node participates iff some wanted node is among its ancestors; only
  // those gradients are needed to reach every wanted node.
  std::vector<char> active(nodes_.size(), 0);
  if (wanted.empty()) {
    std::fill(active.begin(), active.end(), 1);
  } else {
    for (int w : wanted) active[check_id(w)] = 1;
    for (int id = 0; id < size(); ++id) {
      if (active[id]) continue;
      for (int p : nodes_[id].parents) {
        if (active[p]) {
          active[id] = 1;
          break;
        }
      }
    }
  }

  GradientMap grads(nodes_.size());
  if (!active[scalar_id]) {
    // The loss does not depend on any wanted node; all wanted gradients are
    // zero.
    for (int w : wanted) grad_slot(grads, *this, w);
    return grads;
  }
  grads[scalar_id] = DenseMatrix(1, 1, {1.0});

  for (int id = size() - 1; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (grads[id].empty() || !active[id]) continue;
    const DenseMatrix& g = grads[id];
    switch (n.kind) {
      case OpKind::kInput:
        break;
      case OpKind::kMatmul: {
        const int a = n.parents[0], b = n.parents[1];
        if (active[a]) add_in_place(grad_slot(grads, *this, a), matmul_nt(g, value(b)));
        if (active[b]) add_in_place(grad_slot(grads, *this, b), matmul_tn(value(a), g));
        break;
      }
      case OpKind::kSpmmConst: {
        const int x = n.parents[0];
        if (active[x]) add_in_place(grad_slot(grads, *this, x), spmm_transposed(*n.sparse, g));
        break;
      }
      case OpKind::kAddBiasRow: {
        const int x = n.parents[0], b = n.parents[1];
        if (active[x]) add_in_place(grad_slot(grads, *this, x), g);
        if (active[b]) add_in_place(grad_slot(grads, *this, b), column_sums(g));
        break;
      }
      case OpKind::kRelu: {
        const int x = n.parents[0];
        if (!active[x]) break;
        DenseMatrix& gx = grad_slot(grads, *this, x);
        const DenseMatrix& vx = value(x);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          if (vx.data()[i] > 0.0) gx.data()[i] += g.data()[i];
        }
        break;
      }
      case OpKind::kTanh: {
        const int x = n.parents[0];
        if (!active[x]) break;
        DenseMatrix& gx = grad_slot(grads, *this, x);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const double y = n.value.data()[i];
          gx.data()[i] += g.data()[i] * (1.0 - y * y);
        }
        break;
      }
      case OpKind::kSigmoid: {
        const int x = n.parents[0];
        if (!active[x]) break;
        DenseMatrix& gx = grad_slot(grads, *this, x);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          const double y = n.value.data()[i];
          gx.data()[i] += g.data()[i] * y * (1.0 - y);
        }
        break;
      }
      case OpKind::kSoftmaxRows: {
        const int x = n.parents[0];
        if (!active[x]) break;
        DenseMatrix& gx = grad_slot(grads, *this, x);
        for (int i = 0; i < n.value.rows(); ++i) {
          const double* y = n.value.row(i);
          const double* gr = g.row(i);
          double dot = 0.0;
          for (int j = 0; j < n.value.cols(); ++j) dot += gr[j] * y[j];
          double* gxr = gx.row(i);
          for (int j = 0; j < n.value.cols(); ++j) gxr[j] += y[j] * (gr[j] - dot);
        }
        break;
      }
      case OpKind::kElemwiseMul: {
        const int a = n.parents[0], b = n.parents[1];
        if (active[a]) add_in_place(grad_slot(grads, *this, a), hadamard(g, value(b)));
        if (active[b]) add_in_place(grad_slot(grads, *this, b), hadamard(g, value(a)));
        break;
      }
      case OpKind::kConcatCols: {
        int offset = 0;
        for (int p : n.parents) {
          const DenseMatrix& vp = value(p);
          if (active[p]) {
            DenseMatrix& gp = grad_slot(grads, *this, p);
            for (int i = 0; i < vp.rows(); ++i) {
              const double* gr = g.row(i);
              double* gpr = gp.row(i);
              for (int j = 0; j < vp.cols(); ++j) gpr[j] += gr[offset + j];
            }
          }
          offset += vp.cols();
        }
        break;
      }
      case OpKind::kMeanOfSet: {
        const double inv = 1.0 / static_cast<double>(n.parents.size());
        for (int p : n.parents) {
          if (active[p]) add_in_place(grad_slot(grads, *this, p), scaled(g, inv));
        }
        break;
      }
      case OpKind::kScale: {
        const int x = n.parents[0];
        if (active[x]) add_in_place(grad_slot(grads, *this, x), scaled(g, n.factor));
        break;
      }
      case OpKind::kAdd: {
        for (int p : n.parents) {
          if (active[p]) add_in_place(grad_slot(grads, *this, p), g);
        }
        break;
      }
      case OpKind::kMaskedCrossEntropy: {
        const int x = n.parents[0];
        if (!active[x]) break;
        DenseMatrix& gx = grad_slot(grads, *this, x);
        const DenseMatrix& f = value(x);
        const double gs = g.at(0, 0);
        for (std::size_t i = 0; i < n.mask_ids.size(); ++i) {
          const int v = n.mask_ids[i];
          const int c = n.mask_labels[i];
          // Inside the clamp the loss is constant in f, so the gradient is 0.
          if (f.at(v, c) > kCrossEntropyClamp) gx.at(v, c) -= gs / f.at(v, c);
        }
        break;
      }
      case OpKind::kSumAll: {
        const int x = n.parents[0];
        if (!active[x]) break;
        DenseMatrix& gx = grad_slot(grads, *this, x);
        const double gs = g.at(0, 0);
        for (double& v : gx.data()) v += gs;
        break;
      }
    }
  }

  if (wanted.empty()) {
    for (int id = 0; id < size(); ++id) grad_slot(grads, *this, id);
  } else {
    for (int w : wanted) grad_slot(grads, *this, w);
  }
  return grads;
}

GradientMap Tape::backward(int scalar_id) const { return backward(scalar_id, {}); }

namespace {

double rel_err(double analytic, double numeric) {
  return std::fabs(analytic - numeric) /
         std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
}

double loss_for(const FdProblem& problem, const std::vector<DenseMatrix>& params) {
  Tape tape;
  auto [loss_id, ids] = problem.build(tape, params);
  (void)ids;
  const double loss = tape.scalar_value(loss_id);
  if (!std::isfinite(loss)) throw NumericalError("finite_diff_check: non-finite loss");
  return loss;
}

}  // namespace

namespace detail {

FdReport fd_compare(const FdProblem& problem, const std::vector<DenseMatrix>& params,
                    const std::vector<DenseMatrix>& analytic, double eps) {
  if (eps <= 0.0) throw ConfigError("finite_diff_check: eps must be positive");
  FdReport report;
  std::vector<DenseMatrix> work = params;
  for (std::size_t i = 0; i < work.size(); ++i) {
    FdReport::Group group;
    group.name = i < problem.names.size() ? problem.names[i] : "param" + std::to_string(i);
    for (std::size_t e = 0; e < work[i].size(); ++e) {
      const double saved = work[i].data()[e];
      work[i].data()[e] = saved + eps;
      const double up = loss_for(problem, work);
      work[i].data()[e] = saved - eps;
      const double down = loss_for(problem, work);
      work[i].data()[e] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      group.max_rel_err = std::max(group.max_rel_err, rel_err(analytic[i].data()[e], numeric));
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.per_parameter.push_back(std::move(group));
  }
  return report;
}

}  // namespace detail

FdReport finite_diff_check(const FdProblem& problem, const std::vector<DenseMatrix>& params,
                           double eps) {
  Tape tape;
  auto [loss_id, param_ids] = problem.build(tape, params);
  if (param_ids.size() != params.size()) {
    throw ConfigError("finite_diff_check: builder returned wrong parameter id count");
  }
  if (!std::isfinite(tape.scalar_value(loss_id))) {
    throw NumericalError("finite_diff_check: non-finite loss");
  }
  GradientMap grads = tape.backward(loss_id);
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (int id : param_ids) analytic.push_back(grads[id]);
  return detail::fd_compare(problem, params, analytic, eps);
}

}  // namespace gahne
