#include "gahne/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gahne/errors.hpp"
#include "gahne/rng.hpp"

namespace gahne {

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::kAttention: return "attention";
    case Aggregator::kGated: return "gated";
    case Aggregator::kPooling: return "pooling";
    case Aggregator::kMean: return "mean";
    case Aggregator::kSingle: return "single";
  }
  throw ConfigError("unknown aggregator");
}

Aggregator aggregator_from_string(const std::string& name) {
  if (name == "attention") return Aggregator::kAttention;
  if (name == "gated") return Aggregator::kGated;
  if (name == "pooling") return Aggregator::kPooling;
  if (name == "mean") return Aggregator::kMean;
  if (name == "single") return Aggregator::kSingle;
  throw ConfigError("unknown aggregator: " + name);
}

std::string to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::kProvided: return "provided";
    case FeatureMode::kOneHotId: return "onehot-id";
    case FeatureMode::kOneHotType: return "onehot-type";
  }
  throw ConfigError("unknown feature mode");
}

FeatureMode feature_mode_from_string(const std::string& name) {
  if (name == "provided") return FeatureMode::kProvided;
  if (name == "onehot-id") return FeatureMode::kOneHotId;
  if (name == "onehot-type") return FeatureMode::kOneHotType;
  throw ConfigError("unknown feature mode: " + name);
}

void ModelConfig::validate(int num_channels) const {
  if (num_layers < 1) throw ConfigError("config: num_layers must be >= 1");
  if (conv_order < 1) throw ConfigError("config: conv_order must be >= 1");
  if (static_cast<int>(hidden_dims.size()) != num_layers) {
    throw ConfigError("config: hidden_dims must have one entry per layer");
  }
  for (int d : hidden_dims) {
    if (d < 1) throw ConfigError("config: hidden dims must be >= 1");
  }
  if (attention_dim < 1) throw ConfigError("config: attention_dim must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("config: dropout_rate must be in [0, 1)");
  }
  if (channels_enabled && num_channels < 1) {
    throw ConfigError("config: at least one channel required");
  }
  if (aggregator == Aggregator::kSingle &&
      (single_channel < 0 || single_channel >= num_channels)) {
    throw ConfigError("config: single_channel out of range");
  }
  if (attention_shared) {
    for (int d : hidden_dims) {
      if (d != hidden_dims.front()) {
        throw ConfigError("config: attention_shared requires uniform hidden dims");
      }
    }
  }
}

GraphTensors build_graph_tensors(const HeteroGraph& g, FeatureMode mode) {
  g.validate();
  if (!g.is_heterogeneous()) {
    throw DataError("graph is not heterogeneous (|node types| + |edge types| <= 2)");
  }
  GraphTensors t;
  t.features = build_features(g, mode);
  for (const SubNetwork& sub : decompose(g)) {
    t.channel_ops.push_back(row_normalize(sub.adjacency));
  }
  std::vector<std::pair<int, int>> all_edges;
  all_edges.reserve(g.edges.size());
  for (const auto& e : g.edges) all_edges.emplace_back(e.src, e.dst);
  t.whole_op = row_normalize(csr_from_edges(all_edges, g.num_nodes, g.num_nodes, true));
  return t;
}

int ModelParams::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

DenseMatrix& ModelParams::at(const std::string& name) {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("no such parameter: " + name);
  return entries[i].value;
}

const DenseMatrix& ModelParams::at(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("no such parameter: " + name);
  return entries[i].value;
}

namespace {

DenseMatrix glorot(int rows, int cols, uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  DenseMatrix m(rows, cols);
  Rng rng(seed);
  for (double& v : m.data()) v = rng.next_double(-bound, bound);
  return m;
}

struct ParamBuilder {
  ModelParams& params;
  uint64_t seed;

  void weight(const std::string& name, const std::string& group, int rows, int cols) {
    params.entries.push_back(
        {name, group, glorot(rows, cols, derive_seed(seed, name)), true});
  }
  void bias(const std::string& name, const std::string& group, int cols) {
    params.entries.push_back({name, group, DenseMatrix(1, cols), false});
  }
  // Sampled like a weight but exempt from weight decay, as biases are.
  void query(const std::string& name, const std::string& group, int rows) {
    params.entries.push_back({name, group, glorot(rows, 1, derive_seed(seed, name)), false});
  }
};

std::string layer_tag(int layer) { return "l" + std::to_string(layer + 1); }

}  // namespace

ModelParams init_params(const ModelConfig& config, int num_channels, int input_dim,
                        int num_classes, uint64_t seed) {
  config.validate(num_channels);
  if (input_dim < 1) throw ConfigError("init_params: input_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("init_params: num_classes must be >= 1");

  ModelParams params;
  params.config = config;
  params.num_channels = num_channels;
  params.input_dim = input_dim;
  params.num_classes = num_classes;
  ParamBuilder build{params, seed};

  const auto in_dim = [&](int layer) {
    return layer == 0 ? input_dim : config.hidden_dims[layer - 1];
  };

  if (config.channels_enabled) {
    for (int l = 0; l < config.num_layers; ++l) {
      for (int t = 0; t < num_channels; ++t) {
        if (config.aggregator == Aggregator::kSingle && t != config.single_channel) continue;
        build.weight("conv." + layer_tag(l) + ".t" + std::to_string(t) + ".weight",
                     "conv.weight", in_dim(l), config.hidden_dims[l]);
      }
      const std::string tag = config.attention_shared ? "shared" : layer_tag(l);
      const bool first = l == 0 || !config.attention_shared;
      switch (config.aggregator) {
        case Aggregator::kAttention:
          if (first) {
            build.query("att." + tag + ".query", "att.query", config.attention_dim);
            build.weight("att." + tag + ".weight", "att.weight", config.hidden_dims[l],
                         config.attention_dim);
            build.bias("att." + tag + ".bias", "att.bias", config.attention_dim);
          }
          break;
        case Aggregator::kGated:
          for (int t = 0; t < num_channels; ++t) {
            build.weight("gate." + layer_tag(l) + ".t" + std::to_string(t) + ".weight",
                         "gate.weight", config.hidden_dims[l], config.hidden_dims[l]);
          }
          break;
        case Aggregator::kPooling:
          build.weight("pool." + layer_tag(l) + ".weight", "pool.weight",
                       config.hidden_dims[l], config.hidden_dims[l]);
          build.bias("pool." + layer_tag(l) + ".bias", "pool.bias", config.hidden_dims[l]);
          break;
        case Aggregator::kMean:
        case Aggregator::kSingle:
          break;
      }
    }
  } else {
    for (int l = 0; l < config.num_layers; ++l) {
      build.weight("alt." + layer_tag(l) + ".weight", "alt.weight", in_dim(l),
                   config.hidden_dims[l]);
    }
  }

  if (config.fusion_enabled) {
    for (int l = 0; l < config.num_layers; ++l) {
      build.weight("global." + layer_tag(l) + ".weight", "global.weight", in_dim(l),
                   config.hidden_dims[l]);
    }
    build.weight("fusion.weight", "fusion.weight", 2 * config.output_dim(),
                 config.output_dim());
    build.bias("fusion.bias", "fusion.bias", config.output_dim());
  }

  build.weight("classifier.weight", "classifier.weight", config.output_dim(), num_classes);
  return params;
}

int channel_forward(Tape& tape, const SparseMatrix& op, int input, int weights, int order) {
  if (order < 1) throw ConfigError("channel_forward: order must be >= 1");
  const int projected = tape.matmul(input, weights);
  int power = tape.spmm_const(op, projected);
  int total = power;
  for (int k = 2; k <= order; ++k) {
    power = tape.spmm_const(op, power);
    total = tape.add(total, power);
  }
  return tape.relu(total);
}

AttentionResult aggregate_attention(Tape& tape, const std::vector<int>& channels, int query,
                                    int weight, int bias) {
  if (channels.empty()) throw ConfigError("aggregate_attention: no channels");
  std::vector<int> scores;
  scores.reserve(channels.size());
  for (int h : channels) {
    const int transformed = tape.tanh(tape.add_bias_row(tape.matmul(h, weight), bias));
    scores.push_back(tape.sum_all(tape.matmul(transformed, query)));
  }
  const int mu = tape.softmax_rows(tape.concat_cols(scores));

  const int num_nodes = tape.value(channels.front()).rows();
  const int dim = tape.value(channels.front()).cols();
  const int ones_col = tape.input(DenseMatrix::constant(num_nodes, 1, 1.0));
  const int ones_row = tape.input(DenseMatrix::constant(1, dim, 1.0));
  int aggregated = -1;
  for (std::size_t t = 0; t < channels.size(); ++t) {
    DenseMatrix selector(static_cast<int>(channels.size()), 1);
    selector.at(static_cast<int>(t), 0) = 1.0;
    const int mu_t = tape.matmul(mu, tape.input(std::move(selector)));
    const int broadcast = tape.matmul(tape.matmul(ones_col, mu_t), ones_row);
    const int term = tape.elemwise_mul(broadcast, channels[t]);
    aggregated = aggregated < 0 ? term : tape.add(aggregated, term);
  }
  return {aggregated, mu};
}

int aggregate_gated(Tape& tape, const std::vector<int>& channels,
                    const std::vector<int>& gate_weights) {
  if (channels.empty()) throw ConfigError("aggregate_gated: no channels");
  if (channels.size() != gate_weights.size()) {
    throw ConfigError("aggregate_gated: one gate weight per channel required");
  }
  int aggregated = -1;
  for (std::size_t t = 0; t < channels.size(); ++t) {
    const int gate = tape.sigmoid(tape.matmul(channels[t], gate_weights[t]));
    const int term = tape.elemwise_mul(gate, channels[t]);
    aggregated = aggregated < 0 ? term : tape.add(aggregated, term);
  }
  return aggregated;
}

int aggregate_pooling(Tape& tape, const std::vector<int>& channels, int weight, int bias) {
  if (channels.empty()) throw ConfigError("aggregate_pooling: no channels");
  std::vector<int> transformed;
  transformed.reserve(channels.size());
  for (int h : channels) {
    transformed.push_back(tape.relu(tape.add_bias_row(tape.matmul(h, weight), bias)));
  }
  return tape.mean_of_set(transformed);
}

int aggregate_mean(Tape& tape, const std::vector<int>& channels) {
  if (channels.empty()) throw ConfigError("aggregate_mean: no channels");
  return tape.mean_of_set(channels);
}

namespace {

class ForwardBuilder {
 public:
  ForwardBuilder(const GraphTensors& tensors, const ModelParams& params, bool training,
                 uint64_t dropout_seed)
      : tensors_(tensors),
        params_(params),
        config_(params.config),
        training_(training),
        mask_rng_(derive_seed(dropout_seed, "dropout-mask")) {}

  ForwardArtifacts run() {
    config_.validate(tensors_.num_channels());
    if (params_.input_dim != tensors_.input_dim()) {
      throw ConfigError("forward: parameter input dim " + std::to_string(params_.input_dim) +
                        " does not match features dim " + std::to_string(tensors_.input_dim()));
    }
    if (config_.channels_enabled && params_.num_channels != tensors_.num_channels()) {
      throw ConfigError("forward: parameter channel count does not match graph");
    }

    ForwardArtifacts out;
    Tape& tape = out.tape;
    out.param_nodes.reserve(params_.entries.size());
    for (const ParamEntry& e : params_.entries) out.param_nodes.push_back(tape.input(e.value));
    param_nodes_ = &out.param_nodes;
    const int x = tape.input(tensors_.features);

    int channel_out;
    if (config_.channels_enabled) {
      channel_out = channel_stack(tape, x, out.channel_weight_nodes);
    } else {
      channel_out = whole_graph_branch(tape, x, "alt");
    }

    int embeddings;
    if (config_.fusion_enabled) {
      const int global_out = whole_graph_branch(tape, x, "global");
      int fused = tape.concat_cols({channel_out, global_out});
      fused = dropped(tape, fused);
      embeddings = tape.relu(
          tape.add_bias_row(tape.matmul(fused, param("fusion.weight")), param("fusion.bias")));
    } else {
      embeddings = channel_out;
    }

    out.embeddings = embeddings;
    out.probabilities =
        tape.softmax_rows(tape.matmul(embeddings, param("classifier.weight")));
    return out;
  }

 private:
  int param(const std::string& name) const {
    const int i = params_.index_of(name);
    if (i < 0) throw ConfigError("forward: missing parameter " + name);
    return (*param_nodes_)[i];
  }

  // Inverted dropout as a tape-time input transformation: multiply by a
  // constant 0/(1-rate)^-1 mask; identity in evaluation mode.
  int dropped(Tape& tape, int node) {
    if (!training_ || config_.dropout_rate <= 0.0) return node;
    const DenseMatrix& v = tape.value(node);
    DenseMatrix mask(v.rows(), v.cols());
    const double keep_scale = 1.0 / (1.0 - config_.dropout_rate);
    for (double& m : mask.data()) {
      m = mask_rng_.next_double() >= config_.dropout_rate ? keep_scale : 0.0;
    }
    return tape.elemwise_mul(node, tape.input(std::move(mask)));
  }

  int channel_stack(Tape& tape, int x, std::vector<int>& mu_nodes) {
    int z = x;
    for (int l = 0; l < config_.num_layers; ++l) {
      const int z_in = dropped(tape, z);
      std::vector<int> hs;
      std::vector<int> gate_ws;
      for (int t = 0; t < tensors_.num_channels(); ++t) {
        if (config_.aggregator == Aggregator::kSingle && t != config_.single_channel) continue;
        const std::string name =
            "conv." + layer_tag(l) + ".t" + std::to_string(t) + ".weight";
        hs.push_back(channel_forward(tape, tensors_.channel_ops[t], z_in, param(name),
                                     config_.conv_order));
        if (config_.aggregator == Aggregator::kGated) {
          gate_ws.push_back(
              param("gate." + layer_tag(l) + ".t" + std::to_string(t) + ".weight"));
        }
      }
      const std::string att_tag = config_.attention_shared ? "shared" : layer_tag(l);
      switch (config_.aggregator) {
        case Aggregator::kAttention: {
          AttentionResult agg =
              aggregate_attention(tape, hs, param("att." + att_tag + ".query"),
                                  param("att." + att_tag + ".weight"),
                                  param("att." + att_tag + ".bias"));
          mu_nodes.push_back(agg.channel_weights);
          z = agg.aggregated;
          break;
        }
        case Aggregator::kGated:
          z = aggregate_gated(tape, hs, gate_ws);
          break;
        case Aggregator::kPooling:
          z = aggregate_pooling(tape, hs, param("pool." + layer_tag(l) + ".weight"),
                                param("pool." + layer_tag(l) + ".bias"));
          break;
        case Aggregator::kMean:
          z = aggregate_mean(tape, hs);
          break;
        case Aggregator::kSingle:
          z = hs.front();
          break;
      }
    }
    return z;
  }

  int whole_graph_branch(Tape& tape, int x, const std::string& prefix) {
    int z = x;
    for (int l = 0; l < config_.num_layers; ++l) {
      const int z_in = dropped(tape, z);
      z = channel_forward(tape, tensors_.whole_op, z_in,
                          param(prefix + "." + layer_tag(l) + ".weight"), config_.conv_order);
    }
    return z;
  }

  static std::string layer_tag(int layer) { return "l" + std::to_string(layer + 1); }

  const GraphTensors& tensors_;
  const ModelParams& params_;
  const ModelConfig& config_;
  bool training_;
  Rng mask_rng_;
  const std::vector<int>* param_nodes_ = nullptr;
};

}  // namespace

ForwardArtifacts build_forward(const GraphTensors& tensors, const ModelParams& params,
                               bool training, uint64_t dropout_seed) {
  return ForwardBuilder(tensors, params, training, dropout_seed).run();
}

ForwardOutput forward(const GraphTensors& tensors, const ModelParams& params, bool training,
                      uint64_t dropout_seed) {
  ForwardArtifacts arts = build_forward(tensors, params, training, dropout_seed);
  ForwardOutput out;
  out.probabilities = arts.tape.value(arts.probabilities);
  out.embeddings = arts.tape.value(arts.embeddings);
  for (int mu : arts.channel_weight_nodes) {
    out.channel_weights.push_back(arts.tape.value(mu).data());
  }
  return out;
}

std::vector<int> predict_labels(const DenseMatrix& probabilities) {
  std::vector<int> labels(probabilities.rows());
  for (int i = 0; i < probabilities.rows(); ++i) {
    const double* row = probabilities.row(i);
    int best = 0;
    for (int j = 1; j < probabilities.cols(); ++j) {
      if (row[j] > row[best]) best = j;  // strict: ties keep the lowest id
    }
    labels[i] = best;
  }
  return labels;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const ModelParams& params, FeatureMode feature_mode,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  const ModelConfig& c = params.config;
  out << "gahne-checkpoint v1\n";
  out << "num_layers " << c.num_layers << "\n";
  out << "conv_order " << c.conv_order << "\n";
  out << "hidden_dims";
  for (int d : c.hidden_dims) out << ' ' << d;
  out << "\n";
  out << "aggregator " << to_string(c.aggregator) << "\n";
  out << "single_channel " << c.single_channel << "\n";
  out << "attention_dim " << c.attention_dim << "\n";
  out << "attention_shared " << (c.attention_shared ? 1 : 0) << "\n";
  out << "fusion_enabled " << (c.fusion_enabled ? 1 : 0) << "\n";
  out << "channels_enabled " << (c.channels_enabled ? 1 : 0) << "\n";
  out << "dropout_rate " << format_double(c.dropout_rate) << "\n";
  out << "feature_mode " << to_string(feature_mode) << "\n";
  out << "channels " << params.num_channels << "\n";
  out << "classes " << params.num_classes << "\n";
  out << "input_dim " << params.input_dim << "\n";
  out << "params " << params.entries.size() << "\n";
  for (const ParamEntry& e : params.entries) {
    out << "param " << e.name << ' ' << e.group << ' ' << e.value.rows() << ' '
        << e.value.cols() << ' ' << (e.weight_decay ? 1 : 0) << "\n";
    for (int i = 0; i < e.value.rows(); ++i) {
      const double* row = e.value.row(i);
      for (int j = 0; j < e.value.cols(); ++j) {
        out << (j == 0 ? "" : " ") << format_double(row[j]);
      }
      out << "\n";
    }
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

namespace {

[[noreturn]] void bad_checkpoint(const std::string& path, const std::string& why) {
  throw DataError("checkpoint " + path + ": " + why);
}

}  // namespace

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "gahne-checkpoint v1") {
    bad_checkpoint(path, "bad magic line");
  }

  Checkpoint ckpt;
  ModelConfig& c = ckpt.params.config;
  std::size_t num_params = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "num_layers") ss >> c.num_layers;
    else if (key == "conv_order") ss >> c.conv_order;
    else if (key == "hidden_dims") {
      c.hidden_dims.clear();
      int d;
      while (ss >> d) c.hidden_dims.push_back(d);
      if (c.hidden_dims.empty()) bad_checkpoint(path, "empty hidden_dims");
      ss.clear();
    } else if (key == "aggregator") {
      std::string name;
      ss >> name;
      c.aggregator = aggregator_from_string(name);
    } else if (key == "single_channel") ss >> c.single_channel;
    else if (key == "attention_dim") ss >> c.attention_dim;
    else if (key == "attention_shared") { int b; ss >> b; c.attention_shared = b != 0; }
    else if (key == "fusion_enabled") { int b; ss >> b; c.fusion_enabled = b != 0; }
    else if (key == "channels_enabled") { int b; ss >> b; c.channels_enabled = b != 0; }
    else if (key == "dropout_rate") ss >> c.dropout_rate;
    else if (key == "feature_mode") {
      std::string name;
      ss >> name;
      ckpt.feature_mode = feature_mode_from_string(name);
    } else if (key == "channels") ss >> ckpt.params.num_channels;
    else if (key == "classes") ss >> ckpt.params.num_classes;
    else if (key == "input_dim") ss >> ckpt.params.input_dim;
    else if (key == "params") {
      ss >> num_params;
      break;
    } else {
      bad_checkpoint(path, "unknown key: " + key);
    }
    if (ss.fail()) bad_checkpoint(path, "malformed value for key " + key);
  }

  for (std::size_t p = 0; p < num_params; ++p) {
    if (!std::getline(in, line)) bad_checkpoint(path, "truncated parameter table");
    std::istringstream ss(line);
    std::string tag;
    ParamEntry entry;
    int rows = 0, cols = 0, decay = 0;
    ss >> tag >> entry.name >> entry.group >> rows >> cols >> decay;
    if (ss.fail() || tag != "param" || rows < 0 || cols < 0) {
      bad_checkpoint(path, "malformed parameter header");
    }
    entry.weight_decay = decay != 0;
    entry.value = DenseMatrix(rows, cols);
    for (int i = 0; i < rows; ++i) {
      if (!std::getline(in, line)) bad_checkpoint(path, "truncated values for " + entry.name);
      std::istringstream vs(line);
      for (int j = 0; j < cols; ++j) {
        if (!(vs >> entry.value.at(i, j))) {
          bad_checkpoint(path, "malformed values for " + entry.name);
        }
      }
    }
    ckpt.params.entries.push_back(std::move(entry));
  }
  if (num_params != ckpt.params.entries.size()) bad_checkpoint(path, "parameter count mismatch");
  return ckpt;
}

}  // namespace gahne
