#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gahne/errors.hpp"
#include "gahne/eval.hpp"
#include "gahne/hetero_graph.hpp"
#include "gahne/model.hpp"
#include "gahne/rng.hpp"
#include "gahne/train.hpp"

namespace fs = std::filesystem;
using namespace gahne;

namespace {

struct RunConfig {
  // data + artifacts
  std::string nodes_path;
  std::string edges_path;
  std::string features_path;
  std::string labels_path;
  std::string checkpoint_path;
  std::string out_dir = "out";
  uint64_t seed = 1;

  // model
  int layers = 2;
  int dim = 64;
  int conv_order = 1;
  std::string aggregator = "attention";
  int single_channel = 0;
  int attention_dim = 128;
  bool attention_shared = false;
  bool fusion = true;
  bool channels = true;
  std::string feature_mode = "auto";

  // training
  double lr = 0.01;
  double dropout = 0.5;
  double weight_decay = 0.0005;
  int max_epochs = 200;
  int patience = 30;
  int batch_size = 0;
  std::string loss_reduction = "sum";
  int n_train = 400;
  int n_val = 200;

  // evaluation
  int knn_k = 5;
  int repeats = 10;
  std::vector<double> fractions = {0.2, 0.4, 0.6, 0.8};

  // synthesis
  int classes = 3;
  int per_class = 200;
  int aux_types = 2;
  double intra = 0.05;
  double inter = 0.005;
};

ModelConfig model_config(const RunConfig& run) {
  ModelConfig cfg;
  cfg.num_layers = run.layers;
  cfg.hidden_dims.assign(run.layers, run.dim);
  cfg.conv_order = run.conv_order;
  cfg.aggregator = aggregator_from_string(run.aggregator);
  cfg.single_channel = run.single_channel;
  cfg.attention_dim = run.attention_dim;
  cfg.attention_shared = run.attention_shared;
  cfg.fusion_enabled = run.fusion;
  cfg.channels_enabled = run.channels;
  cfg.dropout_rate = run.dropout;
  return cfg;
}

TrainConfig train_config(const RunConfig& run) {
  TrainConfig cfg;
  cfg.learning_rate = run.lr;
  cfg.dropout = run.dropout;
  cfg.weight_decay = run.weight_decay;
  cfg.max_epochs = run.max_epochs;
  cfg.patience = run.patience;
  cfg.batch_size = run.batch_size;
  if (run.loss_reduction == "mean") {
    cfg.mean_reduction = true;
  } else if (run.loss_reduction != "sum") {
    throw ConfigError("loss-reduction must be 'sum' or 'mean'");
  }
  cfg.seed = run.seed;
  return cfg;
}

FeatureMode resolve_feature_mode(const RunConfig& run, const HeteroGraph& g) {
  if (run.feature_mode == "auto") {
    return g.features ? FeatureMode::kProvided : FeatureMode::kOneHotType;
  }
  return feature_mode_from_string(run.feature_mode);
}

HeteroGraph load_input_graph(const RunConfig& run, bool require_labels) {
  if (run.nodes_path.empty() || run.edges_path.empty()) {
    throw ConfigError("expected --nodes and --edges");
  }
  if (require_labels && run.labels_path.empty()) {
    throw ConfigError("this command requires --labels");
  }
  return load_graph(run.nodes_path, run.edges_path, run.features_path, run.labels_path);
}

fs::path prepare_out_dir(const RunConfig& run) {
  fs::path dir(run.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_synth(const RunConfig& run) {
  const HeteroGraph g =
      synth_hin(run.classes, run.per_class, run.aux_types, run.intra, run.inter, run.seed);
  const fs::path dir = prepare_out_dir(run);
  save_graph(g, (dir / "nodes.tsv").string(), (dir / "edges.tsv").string(),
             (dir / "labels.tsv").string());
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot write manifest in " + dir.string());
  manifest << "generator=synth_hin\n"
           << "classes=" << run.classes << "\n"
           << "per_class=" << run.per_class << "\n"
           << "aux_types=" << run.aux_types << "\n"
           << "intra=" << format_double(run.intra) << "\n"
           << "inter=" << format_double(run.inter) << "\n"
           << "seed=" << run.seed << "\n"
           << "num_nodes=" << g.num_nodes << "\n"
           << "num_edges=" << g.edges.size() << "\n";
  std::cout << "synth: wrote " << g.num_nodes << " nodes, " << g.edges.size() << " edges to "
            << dir.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& run) {
  const HeteroGraph g = load_input_graph(run, /*require_labels=*/true);
  const FeatureMode mode = resolve_feature_mode(run, g);
  const GraphTensors tensors = build_graph_tensors(g, mode);
  const Split split = make_splits(g, run.n_train, run.n_val, run.seed);

  const fs::path dir = prepare_out_dir(run);
  std::ofstream log_file(dir / "train.log");
  if (!log_file) throw DataError("cannot write train.log in " + dir.string());
  const LogSink sink = [&](std::string_view line) {
    log_file << line << "\n";
    std::cout << line << "\n";
  };

  TrainResult result;
  try {
    result = train(tensors, g.labels, split, model_config(run), train_config(run), sink);
  } catch (const TrainDivergence& e) {
    write_history_csv(e.history(), (dir / "history.csv").string());
    throw;
  }

  save_checkpoint(result.params, mode, (dir / "checkpoint.txt").string());
  write_history_csv(result.history, (dir / "history.csv").string());
  const EpochStats& best = result.history.epochs[result.history.best_epoch - 1];
  char buf[160];
  std::snprintf(buf, sizeof(buf), "best_epoch %d val_loss %.9g val_acc %.9g stop %s",
                result.history.best_epoch, best.val_loss, best.val_acc,
                to_string(result.history.stop_reason).c_str());
  sink(buf);
  return 0;
}

struct LoadedModel {
  HeteroGraph graph;
  Checkpoint checkpoint;
  GraphTensors tensors;
};

LoadedModel load_model(const RunConfig& run, bool require_labels) {
  if (run.checkpoint_path.empty()) throw ConfigError("expected --checkpoint");
  LoadedModel m;
  m.checkpoint = load_checkpoint(run.checkpoint_path);
  m.graph = load_input_graph(run, require_labels);
  m.tensors = build_graph_tensors(m.graph, m.checkpoint.feature_mode);
  const ModelParams& params = m.checkpoint.params;
  if (params.input_dim != m.tensors.input_dim()) {
    throw DataError("checkpoint input dim " + std::to_string(params.input_dim) +
                    " does not match data feature dim " +
                    std::to_string(m.tensors.input_dim()));
  }
  if (params.config.channels_enabled && params.num_channels != m.tensors.num_channels()) {
    throw DataError("checkpoint channel count " + std::to_string(params.num_channels) +
                    " does not match data edge types " +
                    std::to_string(m.tensors.num_channels()));
  }
  if (require_labels && params.num_classes != m.graph.num_classes) {
    throw DataError("checkpoint class count " + std::to_string(params.num_classes) +
                    " does not match data classes " + std::to_string(m.graph.num_classes));
  }
  return m;
}

int cmd_eval(const RunConfig& run) {
  const LoadedModel m = load_model(run, /*require_labels=*/true);
  const ForwardOutput out = forward(m.tensors, m.checkpoint.params);
  const Split split = make_splits(m.graph, run.n_train, run.n_val, run.seed);

  EvalReport report;
  report.repeats = run.repeats;
  report.seed = run.seed;
  report.classification =
      run_classification_eval(out.embeddings, m.graph.labels, split.test_ids, run.fractions,
                              run.repeats, derive_seed(run.seed, "classification-eval"),
                              run.knn_k);
  report.clustering = run_clustering_eval(out.embeddings, m.graph.labels, run.repeats,
                                          derive_seed(run.seed, "clustering-eval"));
  report.config_echo = {
      {"checkpoint", run.checkpoint_path},
      {"aggregator", to_string(m.checkpoint.params.config.aggregator)},
      {"knn_k", std::to_string(run.knn_k)},
      {"n_train", std::to_string(run.n_train)},
      {"n_val", std::to_string(run.n_val)},
  };

  const fs::path dir = prepare_out_dir(run);
  std::ofstream csv(dir / "eval.csv");
  if (!csv) throw DataError("cannot write eval.csv in " + dir.string());
  report.write_csv(csv);
  report.write_csv(std::cout);
  return 0;
}

int cmd_embed(const RunConfig& run) {
  const LoadedModel m = load_model(run, /*require_labels=*/false);
  const ForwardOutput out = forward(m.tensors, m.checkpoint.params);
  const fs::path dir = prepare_out_dir(run);
  std::ofstream file(dir / "embeddings.tsv");
  if (!file) throw DataError("cannot write embeddings.tsv in " + dir.string());
  for (int v = 0; v < out.embeddings.rows(); ++v) {
    file << v;
    for (int j = 0; j < out.embeddings.cols(); ++j) {
      file << (j == 0 ? '\t' : ' ') << format_double(out.embeddings.at(v, j));
    }
    file << "\n";
  }
  std::cout << "embed: wrote " << out.embeddings.rows() << " x " << out.embeddings.cols()
            << " embeddings to " << (dir / "embeddings.tsv").string() << "\n";
  return 0;
}

// The gradcheck instance: 8 nodes, 2 relations, every node incident to both
// relations so no relu pre-activation sits exactly on its kink.
HeteroGraph gradcheck_graph() {
  HeteroGraph g;
  g.num_nodes = 8;
  g.node_type_of = {0, 0, 0, 0, 1, 1, 2, 2};
  g.node_type_names = {"target", "a", "b"};
  g.edge_type_names = {"ra", "rb"};
  g.edges = {
      {0, 4, 0}, {1, 5, 0}, {2, 6, 0}, {3, 7, 0}, {1, 4, 0},
      {0, 5, 1}, {1, 4, 1}, {2, 7, 1}, {3, 6, 1}, {0, 7, 1}, {2, 5, 1},
  };
  g.labels = {0, 1, 0, 1, -1, -1, -1, -1};
  g.num_classes = 2;
  return g;
}

int cmd_gradcheck(const RunConfig& run) {
  const HeteroGraph g = gradcheck_graph();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  const std::vector<int> ids = {0, 1, 2, 3};
  const std::vector<int> labels = {0, 1, 0, 1};
  constexpr double kThreshold = 1e-4;
  constexpr double kEps = 1e-5;

  double worst = 0.0;
  int combo = 0;
  for (const char* agg : {"attention", "gated", "pooling", "mean"}) {
    for (bool fusion : {true, false}) {
      for (bool channels : {true, false}) {
        ModelConfig cfg;
        cfg.num_layers = 2;
        cfg.hidden_dims = {4, 4};
        cfg.attention_dim = 3;
        cfg.aggregator = aggregator_from_string(agg);
        cfg.fusion_enabled = fusion;
        cfg.channels_enabled = channels;
        cfg.dropout_rate = 0.0;
        ModelParams params = init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2,
                                         derive_seed(run.seed, "gradcheck-init", ++combo));
        // Generic-point evaluation: zero-initialized biases sit exactly on
        // relu kinks whenever a channel row is all-dead.
        Rng jitter(derive_seed(run.seed, "gradcheck-jitter", combo));
        std::vector<DenseMatrix> values;
        for (const ParamEntry& e : params.entries) {
          DenseMatrix v = e.value;
          for (double& x : v.data()) x += jitter.next_double(-0.05, 0.05);
          values.push_back(std::move(v));
        }

        const FdReport report =
            finite_diff_check(model_fd_problem(tensors, params, ids, labels), values, kEps);
        std::printf("combo aggregator=%s fusion=%s channels=%s\n", agg,
                    fusion ? "on" : "off", channels ? "on" : "off");
        std::map<std::string, double> by_group;
        for (std::size_t i = 0; i < report.per_parameter.size(); ++i) {
          const std::string& group = params.entries[i].group;
          by_group[group] = std::max(by_group[group], report.per_parameter[i].max_rel_err);
        }
        for (const auto& [group, err] : by_group) {
          std::printf("group %-18s max_rel_err %.3e\n", group.c_str(), err);
        }
        worst = std::max(worst, report.max_rel_err);
      }
    }
  }
  const bool pass = worst <= kThreshold;
  std::printf("gradcheck %s: max_rel_err %.3e threshold %.0e\n", pass ? "PASS" : "FAIL", worst,
              kThreshold);
  if (!pass) throw NumericalError("gradcheck exceeded the 1e-4 threshold");
  return 0;
}

void register_options(CLI::App* cmd, RunConfig& run) {
  cmd->set_config("--config", "", "flat key=value config file; command-line flags override");

  cmd->add_option("--nodes", run.nodes_path, "nodes file: <node_id>\\t<node_type_name>")
      ->capture_default_str();
  cmd->add_option("--edges", run.edges_path, "edges file: <src>\\t<dst>\\t<edge_type_name>")
      ->capture_default_str();
  cmd->add_option("--features", run.features_path,
                  "optional features file: <node_id>\\t<f_1> ... <f_D>")
      ->capture_default_str();
  cmd->add_option("--labels", run.labels_path, "labels file: <node_id>\\t<class_name>")
      ->capture_default_str();
  cmd->add_option("--checkpoint", run.checkpoint_path, "checkpoint file written by train")
      ->capture_default_str();
  cmd->add_option("--out", run.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", run.seed, "root seed; all randomness derives from it")
      ->capture_default_str();

  cmd->add_option("--layers", run.layers, "convolution layers m")->capture_default_str();
  cmd->add_option("--dim", run.dim, "embedding dimension d for every layer")
      ->capture_default_str();
  cmd->add_option("--conv-order", run.conv_order, "K in the K-order convolution")
      ->capture_default_str();
  cmd->add_option("--aggregator", run.aggregator,
                  "channel aggregator: attention|gated|pooling|mean|single")
      ->capture_default_str();
  cmd->add_option("--single-channel", run.single_channel,
                  "channel index used when --aggregator single")
      ->capture_default_str();
  cmd->add_option("--attention-dim", run.attention_dim, "attention vector dimension d_q")
      ->capture_default_str();
  cmd->add_flag("--attention-shared,!--no-attention-shared", run.attention_shared,
                "share attention parameters across layers")
      ->capture_default_str();
  cmd->add_flag("--fusion,!--no-fusion", run.fusion, "fuse a whole-graph branch (off = no-fusion ablation)")
      ->capture_default_str();
  cmd->add_flag("--channels,!--no-channels", run.channels,
                "per-relation channels (off = twin whole-graph branches)")
      ->capture_default_str();
  cmd->add_option("--feature-mode", run.feature_mode,
                  "input features: auto|provided|onehot-id|onehot-type")
      ->capture_default_str();

  cmd->add_option("--lr", run.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--dropout", run.dropout, "dropout rate during training")
      ->capture_default_str();
  cmd->add_option("--weight-decay", run.weight_decay, "L2 penalty on weight matrices")
      ->capture_default_str();
  cmd->add_option("--max-epochs", run.max_epochs, "maximum training epochs")
      ->capture_default_str();
  cmd->add_option("--patience", run.patience, "early-stopping patience in epochs")
      ->capture_default_str();
  cmd->add_option("--batch-size", run.batch_size,
                  "labeled-minibatch size; 0 trains full batch")
      ->capture_default_str();
  cmd->add_option("--loss-reduction", run.loss_reduction, "cross-entropy reduction: sum|mean")
      ->capture_default_str();
  cmd->add_option("--n-train", run.n_train, "labeled nodes in the training split")
      ->capture_default_str();
  cmd->add_option("--n-val", run.n_val, "labeled nodes in the validation split")
      ->capture_default_str();

  cmd->add_option("--knn-k", run.knn_k, "neighbors for the KNN protocol")->capture_default_str();
  cmd->add_option("--repeats", run.repeats, "evaluation repeats to average")
      ->capture_default_str();
  cmd->add_option("--fractions", run.fractions,
                  "KNN reference fractions of the test embeddings")
      ->delimiter(',')
      ->capture_default_str();

  cmd->add_option("--classes", run.classes, "synth: number of planted classes")
      ->capture_default_str();
  cmd->add_option("--per-class", run.per_class, "synth: target nodes per class")
      ->capture_default_str();
  cmd->add_option("--aux-types", run.aux_types, "synth: auxiliary node types (one relation each)")
      ->capture_default_str();
  cmd->add_option("--intra", run.intra, "synth: same-class edge probability")
      ->capture_default_str();
  cmd->add_option("--inter", run.inter, "synth: cross-class edge probability")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gahne: heterogeneous-network embeddings via aggregated graph convolutions"};
  app.require_subcommand(1);
  RunConfig run;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic heterogeneous graph");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a labeled graph");
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "KNN classification + K-means clustering report");
  CLI::App* embed = app.add_subcommand("embed", "write final node embeddings");
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
  for (CLI::App* cmd : {synth, train_cmd, eval_cmd, embed, gradcheck}) {
    register_options(cmd, run);
  }

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(run);
    if (train_cmd->parsed()) return cmd_train(run);
    if (eval_cmd->parsed()) return cmd_eval(run);
    if (embed->parsed()) return cmd_embed(run);
    if (gradcheck->parsed()) return cmd_gradcheck(run);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
