#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gahne/dense_matrix.hpp"
#include "gahne/hetero_graph.hpp"
#include "gahne/sparse_matrix.hpp"
#include "gahne/tape.hpp"

namespace gahne {

enum class Aggregator { kAttention, kGated, kPooling, kMean, kSingle };

std::string to_string(Aggregator a);
Aggregator aggregator_from_string(const std::string& name);
std::string to_string(FeatureMode m);
FeatureMode feature_mode_from_string(const std::string& name);

struct ModelConfig {
  int num_layers = 2;
  int conv_order = 1;  // K: propagation uses P + P^2 + ... + P^K
  std::vector<int> hidden_dims = {64, 64};
  Aggregator aggregator = Aggregator::kAttention;
  int single_channel = 0;       // only read when aggregator == kSingle
  int attention_dim = 128;      // d_q
  bool attention_shared = false;  // one q/W/b for all layers (uniform dims only)
  bool fusion_enabled = true;   // off: embeddings are the aggregated channel output
  bool channels_enabled = true; // off: channel stack replaced by a second whole-graph branch
  double dropout_rate = 0.5;

  int output_dim() const { return hidden_dims.back(); }
  void validate(int num_channels) const;
};

// Propagation operators and input signal for one graph, shared read-only by
// every forward pass. channel_ops[t] is the row-normalized symmetrized
// adjacency of sub-network t; whole_op covers all relations at once.
struct GraphTensors {
  DenseMatrix features;
  std::vector<SparseMatrix> channel_ops;
  SparseMatrix whole_op;

  int num_nodes() const { return features.rows(); }
  int input_dim() const { return features.cols(); }
  int num_channels() const { return static_cast<int>(channel_ops.size()); }
};

GraphTensors build_graph_tensors(const HeteroGraph& g, FeatureMode mode);

struct ParamEntry {
  std::string name;   // unique, e.g. "conv.l1.t0.weight"
  std::string group;  // report label, e.g. "conv.weight"
  DenseMatrix value;
  bool weight_decay = true;  // L2 applies to weight matrices only
};

// All trainable state. Only the parameters the configured variant needs are
// allocated; entry order is fixed so that checkpoints and optimizer state
// stay aligned.
struct ModelParams {
  ModelConfig config;
  int num_channels = 0;
  int input_dim = 0;
  int num_classes = 0;
  std::vector<ParamEntry> entries;

  int index_of(const std::string& name) const;
  DenseMatrix& at(const std::string& name);
  const DenseMatrix& at(const std::string& name) const;
};

// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases;
// the attention query is sampled like a weight since a zero query would make
// every channel score identically zero.
ModelParams init_params(const ModelConfig& config, int num_channels, int input_dim,
                        int num_classes, uint64_t seed);

// H = relu(sum_{k=1..K} P^k (Z Theta)). The sum starts at k=1: there is no
// identity term, so nodes with all-zero operator rows emit exact zeros.
int channel_forward(Tape& tape, const SparseMatrix& op, int input, int weights, int order);

struct AttentionResult {
  int aggregated;       // Z = sum_t mu_t H_t
  int channel_weights;  // mu, 1 x T, softmax-normalized and node-independent
};
// Channel scores w_t = sum over all nodes of q^T tanh(W h_t^v + b).
AttentionResult aggregate_attention(Tape& tape, const std::vector<int>& channels, int query,
                                    int weight, int bias);
// Per-node, per-dimension gates: Z = sum_t sigmoid(H_t W'_t) ⊙ H_t.
int aggregate_gated(Tape& tape, const std::vector<int>& channels,
                    const std::vector<int>& gate_weights);
// Z = mean_t relu(H_t W_pool + b_pool); the affine map is shared across channels.
int aggregate_pooling(Tape& tape, const std::vector<int>& channels, int weight, int bias);
int aggregate_mean(Tape& tape, const std::vector<int>& channels);

// Forward pass recorded on a tape, exposing the node ids the training loop
// needs. param_nodes is aligned with ModelParams::entries.
struct ForwardArtifacts {
  Tape tape;
  int embeddings = -1;     // E, N x d
  int probabilities = -1;  // F, N x C, row-stochastic
  std::vector<int> channel_weight_nodes;  // per layer; attention only
  std::vector<int> param_nodes;
};

ForwardArtifacts build_forward(const GraphTensors& tensors, const ModelParams& params,
                               bool training, uint64_t dropout_seed);

struct ForwardOutput {
  DenseMatrix probabilities;
  DenseMatrix embeddings;
  std::vector<std::vector<double>> channel_weights;  // per layer; attention only
};

ForwardOutput forward(const GraphTensors& tensors, const ModelParams& params,
                      bool training = false, uint64_t dropout_seed = 0);

// Per-row argmax; ties go to the lowest class id.
std::vector<int> predict_labels(const DenseMatrix& probabilities);

// Text checkpoint: config, channel/class/input dims, then every parameter as
// name, shape and row-major values with 17 significant digits, which makes
// the round-trip bit-exact.
void save_checkpoint(const ModelParams& params, FeatureMode feature_mode,
                     const std::string& path);

struct Checkpoint {
  ModelParams params;
  FeatureMode feature_mode = FeatureMode::kOneHotType;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace gahne
