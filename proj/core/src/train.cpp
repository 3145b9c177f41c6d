#include "gahne/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gahne/rng.hpp"

namespace gahne {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train: dropout must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 0 || patience > max_epochs) {
    throw ConfigError("train: patience must be in [0, max_epochs]");
  }
  if (batch_size < 0) throw ConfigError("train: batch_size must be >= 0");
}

std::string to_string(StopReason r) {
  return r == StopReason::kEarlyStop ? "early_stop" : "max_epochs";
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState state;
  state.first_moment.reserve(params.entries.size());
  state.second_moment.reserve(params.entries.size());
  for (const ParamEntry& e : params.entries) {
    state.first_moment.emplace_back(e.value.rows(), e.value.cols());
    state.second_moment.emplace_back(e.value.rows(), e.value.cols());
  }
  return state;
}

int masked_cross_entropy(Tape& tape, int probabilities, const std::vector<int>& mask_ids,
                         const std::vector<int>& labels) {
  return tape.masked_cross_entropy(probabilities, mask_ids, labels);
}

void adam_step(ModelParams& params, const std::vector<DenseMatrix>& grads, AdamState& state,
               const AdamOptions& options) {
  if (grads.size() != params.entries.size() ||
      state.first_moment.size() != params.entries.size()) {
    throw ConfigError("adam_step: parameter/gradient/state misalignment");
  }
  state.step += 1;
  const double bias1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.entries.size(); ++p) {
    ParamEntry& entry = params.entries[p];
    if (!grads[p].same_shape(entry.value)) throw ConfigError("adam_step: gradient shape mismatch");
    if (!all_finite(grads[p])) {
      throw NumericalError("adam_step: non-finite gradient in " + entry.name);
    }
    const double decay = entry.weight_decay ? options.weight_decay : 0.0;
    DenseMatrix& m = state.first_moment[p];
    DenseMatrix& v = state.second_moment[p];
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double g = grads[p].data()[i] + decay * entry.value.data()[i];
      m.data()[i] = options.beta1 * m.data()[i] + (1.0 - options.beta1) * g;
      v.data()[i] = options.beta2 * v.data()[i] + (1.0 - options.beta2) * g * g;
      const double m_hat = m.data()[i] / bias1;
      const double v_hat = v.data()[i] / bias2;
      entry.value.data()[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

namespace {

struct MaskedLabels {
  std::vector<int> ids;
  std::vector<int> classes;
};

MaskedLabels gather_labels(const std::vector<int>& labels, const std::vector<int>& ids) {
  MaskedLabels out;
  out.ids.reserve(ids.size());
  out.classes.reserve(ids.size());
  for (int v : ids) {
    if (v < 0 || v >= static_cast<int>(labels.size()) || labels[v] < 0) {
      throw DataError("train: split references unlabeled node " + std::to_string(v));
    }
    out.ids.push_back(v);
    out.classes.push_back(labels[v]);
  }
  return out;
}

double plain_cross_entropy(const DenseMatrix& probs, const MaskedLabels& mask,
                           bool mean_reduction) {
  double loss = 0.0;
  for (std::size_t i = 0; i < mask.ids.size(); ++i) {
    loss -= std::log(std::max(probs.at(mask.ids[i], mask.classes[i]), kCrossEntropyClamp));
  }
  if (mean_reduction && !mask.ids.empty()) loss /= static_cast<double>(mask.ids.size());
  return loss;
}

double micro_accuracy(const DenseMatrix& probs, const MaskedLabels& mask) {
  if (mask.ids.empty()) return 0.0;
  const std::vector<int> pred = predict_labels(probs);
  int hits = 0;
  for (std::size_t i = 0; i < mask.ids.size(); ++i) {
    if (pred[mask.ids[i]] == mask.classes[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.ids.size());
}

std::string format_log_line(const EpochStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "epoch %d train_loss %.9g val_loss %.9g val_acc %.9g",
                s.epoch, s.train_loss, s.val_loss, s.val_acc);
  return buf;
}

}  // namespace

TrainResult train(const GraphTensors& tensors, const std::vector<int>& labels,
                  const Split& split, const ModelConfig& model_config,
                  const TrainConfig& train_config, const LogSink& log) {
  train_config.validate();
  if (split.train_ids.empty()) throw DataError("train: empty training split");

  int num_classes = 0;
  for (int c : labels) num_classes = std::max(num_classes, c + 1);
  if (num_classes < 1) throw DataError("train: no labeled nodes");

  ModelConfig config = model_config;
  config.dropout_rate = train_config.dropout;
  ModelParams params =
      init_params(config, tensors.num_channels(), tensors.input_dim(), num_classes,
                  derive_seed(train_config.seed, "init"));
  AdamState adam = make_adam_state(params);
  AdamOptions options;
  options.learning_rate = train_config.learning_rate;
  options.weight_decay = train_config.weight_decay;

  const MaskedLabels train_mask = gather_labels(labels, split.train_ids);
  const MaskedLabels val_mask = gather_labels(labels, split.val_ids);

  TrainHistory history;
  ModelParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const uint64_t epoch_seed = derive_seed(train_config.seed, "dropout", epoch);

    // Labeled minibatches recompute the full-graph forward and vary only the
    // loss mask; graph convolution cannot be subset without neighbor
    // sampling.
    std::vector<std::size_t> order(train_mask.ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (train_config.batch_size > 0) {
      Rng rng(derive_seed(train_config.seed, "batch-order", epoch));
      rng.shuffle(order);
    }
    const std::size_t batch =
        train_config.batch_size > 0 ? train_config.batch_size : train_mask.ids.size();

    double train_loss = 0.0;
    for (std::size_t begin = 0, index = 0; begin < order.size(); begin += batch, ++index) {
      MaskedLabels chunk;
      for (std::size_t i = begin; i < std::min(begin + batch, order.size()); ++i) {
        chunk.ids.push_back(train_mask.ids[order[i]]);
        chunk.classes.push_back(train_mask.classes[order[i]]);
      }
      ForwardArtifacts arts =
          build_forward(tensors, params, /*training=*/true, derive_seed(epoch_seed, "batch", index));
      int loss_id = masked_cross_entropy(arts.tape, arts.probabilities, chunk.ids, chunk.classes);
      if (train_config.mean_reduction) {
        loss_id = arts.tape.scale(loss_id, 1.0 / static_cast<double>(chunk.ids.size()));
      }
      const double loss = arts.tape.scalar_value(loss_id);
      if (!std::isfinite(loss)) {
        throw TrainDivergence("train: non-finite loss at epoch " + std::to_string(epoch),
                              history);
      }
      train_loss += loss;
      GradientMap grad_map = arts.tape.backward(loss_id, arts.param_nodes);
      std::vector<DenseMatrix> grads;
      grads.reserve(params.entries.size());
      for (int id : arts.param_nodes) grads.push_back(std::move(grad_map[id]));
      try {
        adam_step(params, grads, adam, options);
      } catch (const NumericalError& e) {
        throw TrainDivergence(std::string(e.what()) + " at epoch " + std::to_string(epoch),
                              history);
      }
    }

    const ForwardOutput eval_out = forward(tensors, params, /*training=*/false);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss;
    stats.val_loss = plain_cross_entropy(eval_out.probabilities, val_mask,
                                         train_config.mean_reduction);
    stats.val_acc = micro_accuracy(eval_out.probabilities, val_mask);
    history.epochs.push_back(stats);
    if (log) log(format_log_line(stats));

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      history.best_epoch = epoch;
      best_params = params;
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
    }
    if (epochs_since_improvement >= std::max(train_config.patience, 1)) {
      history.stop_reason = StopReason::kEarlyStop;
      break;
    }
  }
  if (history.stop_reason != StopReason::kEarlyStop) history.stop_reason = StopReason::kMaxEpochs;

  return {std::move(best_params), std::move(history)};
}

FdProblem model_fd_problem(const GraphTensors& tensors, const ModelParams& params,
                           const std::vector<int>& mask_ids, const std::vector<int>& labels) {
  FdProblem problem;
  for (const ParamEntry& e : params.entries) problem.names.push_back(e.name);
  ModelParams shell = params;
  problem.build = [&tensors, shell, mask_ids, labels](
                      Tape& tape, const std::vector<DenseMatrix>& values) {
    ModelParams candidate = shell;
    if (values.size() != candidate.entries.size()) {
      throw ConfigError("model_fd_problem: wrong parameter count");
    }
    for (std::size_t i = 0; i < values.size(); ++i) candidate.entries[i].value = values[i];
    ForwardArtifacts arts = build_forward(tensors, candidate, /*training=*/false, 0);
    const int loss = arts.tape.masked_cross_entropy(arts.probabilities, mask_ids, labels);
    tape = std::move(arts.tape);
    return std::make_pair(loss, arts.param_nodes);
  };
  return problem;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history: " + path);
  out << "epoch,train_loss,val_loss,val_acc\n";
  char buf[160];
  for (const EpochStats& s : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", s.epoch, s.train_loss, s.val_loss,
                  s.val_acc);
    out << buf;
  }
  out << "# best_epoch " << history.best_epoch << "\n";
  out << "# stop_reason " << to_string(history.stop_reason) << "\n";
}

}  // namespace gahne
