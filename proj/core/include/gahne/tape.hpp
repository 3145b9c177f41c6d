#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gahne/dense_matrix.hpp"
#include "gahne/sparse_matrix.hpp"

namespace gahne {

enum class OpKind {
  kInput,
  kMatmul,
  kSpmmConst,
  kAddBiasRow,
  kRelu,
  kTanh,
  kSigmoid,
  kSoftmaxRows,
  kElemwiseMul,
  kConcatCols,
  kMeanOfSet,
  kScale,
  kAdd,
  kMaskedCrossEntropy,
  kSumAll,
};

// node-id -> gradient of the same shape as that node's value.
using GradientMap = std::vector<DenseMatrix>;

// Recorded computation over dense matrices. Append-only and topologically
// ordered by construction: parents always precede children. Forward values
// are computed eagerly at record time; backward() replays the tape in
// reverse. A tape is confined to one thread; independent tapes may run
// concurrently.
//
// Sparse operators passed to spmm_const are borrowed and treated as
// constants (no gradient flows into them); they must outlive the tape.
class Tape {
 public:
  struct Node {
    OpKind kind = OpKind::kInput;
    std::vector<int> parents;
    DenseMatrix value;
    // constant payloads
    const SparseMatrix* sparse = nullptr;   // kSpmmConst
    double factor = 0.0;                    // kScale
    std::vector<int> mask_ids;              // kMaskedCrossEntropy
    std::vector<int> mask_labels;           // kMaskedCrossEntropy, aligned with mask_ids
  };

  int input(DenseMatrix value);
  int matmul(int a, int b);
  int spmm_const(const SparseMatrix& op, int x);
  int add_bias_row(int x, int bias);  // bias is 1 x cols(x)
  int relu(int x);
  int tanh(int x);
  int sigmoid(int x);
  int softmax_rows(int x);
  int elemwise_mul(int a, int b);
  int concat_cols(const std::vector<int>& parts);
  int mean_of_set(const std::vector<int>& parts);
  int scale(int x, double factor);
  int add(int a, int b);
  // Sum over the listed nodes of -ln(max(probs[v, label_v], 1e-12)).
  int masked_cross_entropy(int probs, const std::vector<int>& node_ids,
                           const std::vector<int>& node_labels);
  int sum_all(int x);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[check_id(id)]; }
  const DenseMatrix& value(int id) const { return nodes_[check_id(id)].value; }
  double scalar_value(int id) const;

  // Gradients of the 1x1 node `scalar_id` with respect to every node;
  // untouched nodes get zero gradients of their value's shape.
  GradientMap backward(int scalar_id) const;

  // Restricted variant: propagates only along paths that start at one of
  // `wanted` (standard stop-gradient pruning). Entries off those paths are
  // left empty. Used by the training loop; the unrestricted overload is the
  // reference behaviour.
  GradientMap backward(int scalar_id, const std::vector<int>& wanted) const;

 private:
  int check_id(int id) const;
  int push(Node node);

  std::vector<Node> nodes_;
};

constexpr double kCrossEntropyClamp = 1e-12;

// Central-difference gradient verification. `build` constructs the loss on
// a fresh tape from the given parameter values and returns the loss node id
// plus the tape input ids of the parameters, in order.
struct FdProblem {
  std::function<std::pair<int, std::vector<int>>(Tape&, const std::vector<DenseMatrix>&)> build;
  std::vector<std::string> names;  // optional per-parameter labels
};

struct FdReport {
  struct Group {
    std::string name;
    double max_rel_err = 0.0;
  };
  double max_rel_err = 0.0;
  std::vector<Group> per_parameter;
};

// Relative error |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
// maximized over all parameter entries. Throws NumericalError if any
// perturbed loss is non-finite.
FdReport finite_diff_check(const FdProblem& problem, const std::vector<DenseMatrix>& params,
                           double eps);

namespace detail {
// Comparison half of finite_diff_check, with externally supplied analytic
// gradients. Exposed so tests can feed corrupted gradients and confirm the
// checker reports them.
FdReport fd_compare(const FdProblem& problem, const std::vector<DenseMatrix>& params,
                    const std::vector<DenseMatrix>& analytic, double eps);
}  // namespace detail

}  // namespace gahne
