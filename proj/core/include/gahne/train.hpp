#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gahne/errors.hpp"
#include "gahne/hetero_graph.hpp"
#include "gahne/model.hpp"
#include "gahne/tape.hpp"

namespace gahne {

struct TrainConfig {
  double learning_rate = 0.01;
  double dropout = 0.5;
  double weight_decay = 0.0005;  // L2, weight matrices only
  int max_epochs = 200;
  int patience = 30;
  int batch_size = 0;  // 0 = full batch; otherwise labeled minibatches
  bool mean_reduction = false;  // loss stays a sum over labeled nodes by default
  uint64_t seed = 1;

  void validate() const;
};

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// First/second moment estimates, aligned with ModelParams::entries.
struct AdamState {
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;
  int64_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);

// Cross-entropy over the masked nodes, recorded on the tape:
// sum_v -ln(max(F[v, y_v], 1e-12)). Differentiable through the tape.
int masked_cross_entropy(Tape& tape, int probabilities, const std::vector<int>& mask_ids,
                         const std::vector<int>& labels);

// One Adam update. L2 is folded into the gradient (g' = g + lambda * theta)
// for entries flagged weight_decay; biases and the attention query are
// exempt. Throws NumericalError on non-finite gradients.
void adam_step(ModelParams& params, const std::vector<DenseMatrix>& grads, AdamState& state,
               const AdamOptions& options);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

enum class StopReason { kMaxEpochs, kEarlyStop };

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based epoch with minimum validation loss
  StopReason stop_reason = StopReason::kMaxEpochs;
};

std::string to_string(StopReason r);

// Divergence carries the epochs completed so far.
class TrainDivergence : public NumericalError {
 public:
  TrainDivergence(const std::string& what, TrainHistory history)
      : NumericalError(what), history_(std::move(history)) {}
  const TrainHistory& history() const { return history_; }

 private:
  TrainHistory history_;
};

struct TrainResult {
  ModelParams params;  // checkpointed copy from the best-validation epoch
  TrainHistory history;
};

using LogSink = std::function<void(std::string_view)>;

// Finite-difference problem over every allocated parameter of a model:
// rebuilds the dropout-free forward pass plus masked cross-entropy from
// candidate parameter values. Names are the parameter entry names.
FdProblem model_fd_problem(const GraphTensors& tensors, const ModelParams& params,
                           const std::vector<int>& mask_ids, const std::vector<int>& labels);

// Semi-supervised training: per epoch, forward with dropout on, masked loss
// over the train ids (full batch) or over each labeled minibatch in turn,
// backward, Adam; then a dropout-off validation pass. Stops early once the
// validation loss has gone `patience` consecutive epochs without improving.
TrainResult train(const GraphTensors& tensors, const std::vector<int>& labels,
                  const Split& split, const ModelConfig& model_config,
                  const TrainConfig& train_config, const LogSink& log = {});

void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace gahne
