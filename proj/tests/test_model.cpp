#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "gahne/errors.hpp"
#include "gahne/hetero_graph.hpp"
#include "gahne/model.hpp"
#include "gahne/rng.hpp"
#include "support/dense_reference.hpp"
#include "support/temp_dir.hpp"
#include "support/test_graphs.hpp"

using namespace gahne;

namespace {

ModelConfig tiny_config(Aggregator agg, bool fusion = true, bool channels = true) {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_dims = {4, 4};
  cfg.attention_dim = 3;
  cfg.aggregator = agg;
  cfg.fusion_enabled = fusion;
  cfg.channels_enabled = channels;
  cfg.dropout_rate = 0.0;
  return cfg;
}

DenseMatrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = rng.next_double(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("init_params shapes follow the config") {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.hidden_dims = {64, 64};
  ModelParams p = init_params(cfg, 3, 10, 4, 7);
  for (int t = 0; t < 3; ++t) {
    const DenseMatrix& theta = p.at("conv.l1.t" + std::to_string(t) + ".weight");
    CHECK(theta.rows() == 10);
    CHECK(theta.cols() == 64);
  }
  CHECK(p.at("conv.l2.t0.weight").rows() == 64);
  CHECK(p.at("classifier.weight").rows() == 64);
  CHECK(p.at("classifier.weight").cols() == 4);
  CHECK(p.at("fusion.weight").rows() == 128);
  CHECK(p.at("fusion.weight").cols() == 64);
  CHECK(p.at("att.l1.weight").rows() == 64);
  CHECK(p.at("att.l1.weight").cols() == 128);
  CHECK(p.at("att.l1.query").rows() == 128);
  CHECK(p.at("att.l2.bias").cols() == 128);
}

TEST_CASE("mean aggregator allocates no aggregation parameters") {
  ModelParams p = init_params(tiny_config(Aggregator::kMean), 2, 5, 2, 7);
  CHECK(p.index_of("att.l1.query") < 0);
  CHECK(p.index_of("att.l1.weight") < 0);
  CHECK(p.index_of("gate.l1.t0.weight") < 0);
  CHECK(p.index_of("pool.l1.weight") < 0);
  CHECK(p.index_of("conv.l1.t0.weight") >= 0);
}

TEST_CASE("init_params is byte-identical for a fixed seed") {
  ModelParams a = init_params(tiny_config(Aggregator::kAttention), 2, 5, 2, 123);
  ModelParams b = init_params(tiny_config(Aggregator::kAttention), 2, 5, 2, 123);
  ModelParams c = init_params(tiny_config(Aggregator::kAttention), 2, 5, 2, 124);
  REQUIRE(a.entries.size() == b.entries.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(max_abs_diff(a.entries[i].value, b.entries[i].value) == 0.0);
    differs = differs || max_abs_diff(a.entries[i].value, c.entries[i].value) != 0.0;
  }
  CHECK(differs);
}

TEST_CASE("biases start at zero, query does not") {
  ModelParams p = init_params(tiny_config(Aggregator::kAttention), 2, 5, 2, 9);
  CHECK(max_abs_diff(p.at("att.l1.bias"), DenseMatrix(1, 3)) == 0.0);
  CHECK(max_abs_diff(p.at("fusion.bias"), DenseMatrix(1, 4)) == 0.0);
  double query_norm = 0.0;
  for (double v : p.at("att.l1.query").data()) query_norm += std::fabs(v);
  CHECK(query_norm > 0.0);
  // decay flags: weights yes, biases and query no
  CHECK(p.entries[p.index_of("conv.l1.t0.weight")].weight_decay);
  CHECK(!p.entries[p.index_of("att.l1.bias")].weight_decay);
  CHECK(!p.entries[p.index_of("att.l1.query")].weight_decay);
}

TEST_CASE("channel_forward emits exact zeros for zero operator rows") {
  Rng rng(derive_seed(21, "zero-rows"));
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + static_cast<int>(rng.next_below(6));
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i < n; ++i) {
      for (int j = 1; j < n; ++j) {
        if (i != j && rng.next_double() < 0.3) edges.emplace_back(i, j);
      }
    }
    // node 0 never appears; random other nodes may be isolated too
    SparseMatrix p = row_normalize(csr_from_edges(edges, n, n, true));
    Tape tape;
    const int z = tape.input(random_matrix(rng, n, 3));
    const int theta = tape.input(random_matrix(rng, 3, 2));
    const int h = channel_forward(tape, p, z, theta, 2);
    for (int v = 0; v < n; ++v) {
      if (p.row_offsets()[v] != p.row_offsets()[v + 1]) continue;
      for (int j = 0; j < 2; ++j) CHECK(tape.value(h).at(v, j) == 0.0);
    }
  }
}

TEST_CASE("channel_forward identity composition") {
  std::vector<std::pair<int, int>> diag;
  for (int i = 0; i < 3; ++i) diag.emplace_back(i, i);
  SparseMatrix p = csr_from_edges(diag, 3, 3, false);
  Tape tape;
  Rng rng(derive_seed(21, "identity"));
  const DenseMatrix zv = random_matrix(rng, 3, 2, 0.0, 1.0);
  const int z = tape.input(zv);
  const int theta = tape.input(DenseMatrix::identity(2));
  const int h = channel_forward(tape, p, z, theta, 1);
  CHECK(max_abs_diff(tape.value(h), zv) == 0.0);
}

TEST_CASE("channel_forward matches a dense hand computation on a path graph") {
  // Path 0-1-2, P = D^{-1}A.
  SparseMatrix p = row_normalize(csr_from_edges({{0, 1}, {1, 2}}, 3, 3, true));
  const DenseMatrix zv(3, 2, {1.0, -2.0, 0.5, 3.0, -1.0, 2.0});
  const DenseMatrix tv(2, 2, {2.0, 0.5, -1.0, 1.5});

  // relu(P Z T + P^2 Z T) with plain loops.
  const double pd[3][3] = {{0, 1, 0}, {0.5, 0, 0.5}, {0, 1, 0}};
  double pz[3][2] = {}, ppz[3][2] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 3; ++k) pz[i][j] += pd[i][k] * zv.at(k, j);
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 3; ++k) ppz[i][j] += pd[i][k] * pz[k][j];
    }
  }
  DenseMatrix expected(3, 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 2; ++k) acc += (pz[i][k] + ppz[i][k]) * tv.at(k, j);
      expected.at(i, j) = acc > 0.0 ? acc : 0.0;
    }
  }

  Tape tape;
  const int h = channel_forward(tape, p, tape.input(zv), tape.input(tv), 2);
  CHECK(max_abs_diff(tape.value(h), expected) <= 1e-12);
}

TEST_CASE("attention with one channel is the identity with weight 1") {
  Rng rng(derive_seed(21, "att-single"));
  Tape tape;
  const int h = tape.input(random_matrix(rng, 4, 3));
  const int q = tape.input(random_matrix(rng, 2, 1));
  const int w = tape.input(random_matrix(rng, 3, 2));
  const int b = tape.input(random_matrix(rng, 1, 2));
  AttentionResult agg = aggregate_attention(tape, {h}, q, w, b);
  CHECK(tape.value(agg.channel_weights).at(0, 0) == 1.0);
  CHECK(max_abs_diff(tape.value(agg.aggregated), tape.value(h)) == 0.0);
}

TEST_CASE("attention over identical channels is uniform") {
  Rng rng(derive_seed(21, "att-uniform"));
  Tape tape;
  const DenseMatrix hv = random_matrix(rng, 5, 3);
  const int h1 = tape.input(hv);
  const int h2 = tape.input(hv);
  const int h3 = tape.input(hv);
  const int q = tape.input(random_matrix(rng, 2, 1));
  const int w = tape.input(random_matrix(rng, 3, 2));
  const int b = tape.input(random_matrix(rng, 1, 2));
  AttentionResult agg = aggregate_attention(tape, {h1, h2, h3}, q, w, b);
  const DenseMatrix& mu = tape.value(agg.channel_weights);
  for (int t = 0; t < 3; ++t) CHECK(std::fabs(mu.at(0, t) - 1.0 / 3.0) <= 1e-12);
  CHECK(max_abs_diff(tape.value(agg.aggregated), hv) <= 1e-12);
}

TEST_CASE("attention scalar hand computation") {
  Tape tape;
  const int h1 = tape.input(DenseMatrix(1, 1, {0.0}));
  const int h2 = tape.input(DenseMatrix(1, 1, {1.0}));
  const int q = tape.input(DenseMatrix(1, 1, {1.0}));
  const int w = tape.input(DenseMatrix(1, 1, {1.0}));
  const int b = tape.input(DenseMatrix(1, 1, {0.0}));
  AttentionResult agg = aggregate_attention(tape, {h1, h2}, q, w, b);
  const DenseMatrix& mu = tape.value(agg.channel_weights);
  CHECK(mu.at(0, 0) == doctest::Approx(0.3184).epsilon(1e-3));
  CHECK(mu.at(0, 1) == doctest::Approx(0.6816).epsilon(1e-3));
}

TEST_CASE("gated aggregation with zero weights halves the channel sum") {
  Rng rng(derive_seed(21, "gate-zero"));
  Tape tape;
  const DenseMatrix h1v = random_matrix(rng, 4, 3);
  const DenseMatrix h2v = random_matrix(rng, 4, 3);
  const int h1 = tape.input(h1v);
  const int h2 = tape.input(h2v);
  const int w1 = tape.input(DenseMatrix(3, 3));
  const int w2 = tape.input(DenseMatrix(3, 3));
  const int z = aggregate_gated(tape, {h1, h2}, {w1, w2});
  CHECK(max_abs_diff(tape.value(z), scaled(add(h1v, h2v), 0.5)) <= 1e-12);
}

TEST_CASE("gated aggregation: a zero channel contributes nothing") {
  Rng rng(derive_seed(21, "gate-annihilate"));
  Tape tape;
  const DenseMatrix h1v = random_matrix(rng, 4, 3);
  const int h1 = tape.input(h1v);
  const int h2 = tape.input(DenseMatrix(4, 3));
  const int w1 = tape.input(random_matrix(rng, 3, 3));
  const int w2 = tape.input(random_matrix(rng, 3, 3));
  const int z12 = aggregate_gated(tape, {h1, h2}, {w1, w2});
  const int z1 = aggregate_gated(tape, {h1}, {w1});
  CHECK(max_abs_diff(tape.value(z12), tape.value(z1)) == 0.0);
}

TEST_CASE("gated scalar hand computation") {
  Tape tape;
  const int h = tape.input(DenseMatrix(1, 2, {2.0, -2.0}));
  const int w = tape.input(DenseMatrix::identity(2));
  const int z = aggregate_gated(tape, {h}, {w});
  CHECK(tape.value(z).at(0, 0) == doctest::Approx(1.7616).epsilon(1e-3));
  CHECK(tape.value(z).at(0, 1) == doctest::Approx(-0.2384).epsilon(1e-3));
}

TEST_CASE("pooling identity path and equal-channel collapse") {
  Rng rng(derive_seed(21, "pool"));
  Tape tape;
  const DenseMatrix hv = random_matrix(rng, 4, 3, 0.0, 1.0);
  const int h = tape.input(hv);
  const int w_id = tape.input(DenseMatrix::identity(3));
  const int b0 = tape.input(DenseMatrix(1, 3));
  CHECK(max_abs_diff(tape.value(aggregate_pooling(tape, {h}, w_id, b0)), hv) == 0.0);

  const int w = tape.input(random_matrix(rng, 3, 3));
  const int b = tape.input(random_matrix(rng, 1, 3));
  const int h2 = tape.input(hv);
  const int pooled = aggregate_pooling(tape, {h, h2}, w, b);
  const int single = tape.relu(tape.add_bias_row(tape.matmul(h, w), b));
  CHECK(max_abs_diff(tape.value(pooled), tape.value(single)) <= 1e-12);
}

TEST_CASE("pooling scalar hand computation") {
  Tape tape;
  const int h1 = tape.input(DenseMatrix(1, 1, {1.0}));
  const int h2 = tape.input(DenseMatrix(1, 1, {3.0}));
  const int w = tape.input(DenseMatrix(1, 1, {2.0}));
  const int b = tape.input(DenseMatrix(1, 1, {-1.0}));
  const int z = aggregate_pooling(tape, {h1, h2}, w, b);
  CHECK(tape.value(z).at(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("mean aggregation") {
  Rng rng(derive_seed(21, "mean"));
  Tape tape;
  const DenseMatrix a = random_matrix(rng, 3, 2);
  const DenseMatrix b = random_matrix(rng, 3, 2);
  const DenseMatrix c = random_matrix(rng, 3, 2);
  const int z =
      aggregate_mean(tape, {tape.input(a), tape.input(b), tape.input(c)});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(tape.value(z).at(i, j) ==
            doctest::Approx((a.at(i, j) + b.at(i, j) + c.at(i, j)) / 3.0).epsilon(1e-15));
    }
  }
  const int zz = aggregate_mean(tape, {tape.input(a), tape.input(a)});
  CHECK(max_abs_diff(tape.value(zz), a) == 0.0);

  Tape t2;
  const int z2 = aggregate_mean(
      t2, {t2.input(DenseMatrix(1, 1, {0.0})), t2.input(DenseMatrix(1, 1, {4.0}))});
  CHECK(t2.value(z2).at(0, 0) == 2.0);
}

TEST_CASE("forward probabilities are row-stochastic for every variant") {
  const HeteroGraph g = fixtures::small_hin();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  for (Aggregator agg : {Aggregator::kAttention, Aggregator::kGated, Aggregator::kPooling,
                         Aggregator::kMean, Aggregator::kSingle}) {
    for (bool fusion : {true, false}) {
      ModelConfig cfg = tiny_config(agg, fusion);
      cfg.single_channel = 1;
      ModelParams params = init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2, 5);
      ForwardOutput out = forward(tensors, params);
      for (int i = 0; i < out.probabilities.rows(); ++i) {
        double total = 0.0;
        for (int j = 0; j < out.probabilities.cols(); ++j) total += out.probabilities.at(i, j);
        CHECK(std::fabs(total - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("zero classifier weights give uniform probabilities") {
  const HeteroGraph g = fixtures::small_hin();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  ModelParams params = init_params(tiny_config(Aggregator::kMean), 2, 8, 4, 5);
  params.at("classifier.weight") = DenseMatrix(4, 4);
  ForwardOutput out = forward(tensors, params);
  for (int i = 0; i < out.probabilities.rows(); ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(out.probabilities.at(i, j) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluation forward is byte-stable and matches the dense reference") {
  const HeteroGraph g = fixtures::small_hin_with_isolated();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  const refimpl::Mat x = refimpl::from_dense(tensors.features);
  int seed = 100;
  for (Aggregator agg : {Aggregator::kAttention, Aggregator::kGated, Aggregator::kPooling,
                         Aggregator::kMean, Aggregator::kSingle}) {
    for (bool fusion : {true, false}) {
      ModelConfig cfg = tiny_config(agg, fusion);
      cfg.single_channel = 0;
      ModelParams params =
          init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2, ++seed);
      ForwardOutput out = forward(tensors, params);
      ForwardOutput out2 = forward(tensors, params);
      CHECK(max_abs_diff(out.probabilities, out2.probabilities) == 0.0);
      CHECK(max_abs_diff(out.embeddings, out2.embeddings) == 0.0);

      const refimpl::Reference ref = refimpl::reference_forward(g, params, x);
      double worst = 0.0;
      for (int i = 0; i < out.embeddings.rows(); ++i) {
        for (int j = 0; j < out.embeddings.cols(); ++j) {
          worst = std::max(worst, std::fabs(out.embeddings.at(i, j) - ref.embeddings[i][j]));
        }
        for (int j = 0; j < out.probabilities.cols(); ++j) {
          worst = std::max(worst,
                           std::fabs(out.probabilities.at(i, j) - ref.probabilities[i][j]));
        }
      }
      CAPTURE(to_string(agg));
      CAPTURE(fusion);
      CHECK(worst <= 1e-10);
    }
  }
  // channel stack disabled: twin whole-graph branches
  for (bool fusion : {true, false}) {
    ModelConfig cfg = tiny_config(Aggregator::kMean, fusion, /*channels=*/false);
    ModelParams params =
        init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2, ++seed);
    ForwardOutput out = forward(tensors, params);
    const refimpl::Reference ref = refimpl::reference_forward(g, params, x);
    double worst = 0.0;
    for (int i = 0; i < out.embeddings.rows(); ++i) {
      for (int j = 0; j < out.embeddings.cols(); ++j) {
        worst = std::max(worst, std::fabs(out.embeddings.at(i, j) - ref.embeddings[i][j]));
      }
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("attention channel weights form a probability vector at every layer") {
  const HeteroGraph g = fixtures::small_hin();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  for (int seed = 0; seed < 100; ++seed) {
    ModelParams params = init_params(tiny_config(Aggregator::kAttention), 2, 8, 2, seed);
    ForwardOutput out = forward(tensors, params);
    REQUIRE(out.channel_weights.size() == 2);
    for (const auto& mu : out.channel_weights) {
      REQUIRE(mu.size() == 2);
      double total = 0.0;
      for (double m : mu) {
        CHECK(m >= 0.0);
        total += m;
      }
      CHECK(std::fabs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("predict_labels takes the row argmax with lowest-id ties") {
  CHECK(predict_labels(DenseMatrix(1, 3, {0.1, 0.7, 0.2})) == std::vector<int>{1});
  CHECK(predict_labels(DenseMatrix(1, 4, {0.25, 0.25, 0.25, 0.25})) == std::vector<int>{0});
  Rng rng(derive_seed(21, "argmax"));
  for (int trial = 0; trial < 100; ++trial) {
    DenseMatrix f = random_matrix(rng, 6, 4, 0.0, 1.0);
    const std::vector<int> got = predict_labels(f);
    for (int i = 0; i < 6; ++i) {
      int best = 0;
      for (int j = 1; j < 4; ++j) {
        if (f.at(i, j) > f.at(i, best)) best = j;
      }
      CHECK(got[i] == best);
    }
  }
}

TEST_CASE("argmax is invariant to constant logit shifts") {
  Rng rng(derive_seed(21, "logit-shift"));
  for (int trial = 0; trial < 100; ++trial) {
    DenseMatrix logits = random_matrix(rng, 5, 3, -4.0, 4.0);
    const double shift = rng.next_double(-50.0, 50.0);
    DenseMatrix shifted = logits;
    for (double& v : shifted.data()) v += shift;
    Tape tape;
    const std::vector<int> a = predict_labels(tape.value(tape.softmax_rows(tape.input(logits))));
    const std::vector<int> b = predict_labels(tape.value(tape.softmax_rows(tape.input(shifted))));
    CHECK(a == b);
  }
}

TEST_CASE("permutation equivariance of embeddings and probabilities") {
  const HeteroGraph g = fixtures::small_hin();
  Rng rng(derive_seed(21, "permutation"));
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotType);
  ModelParams params = init_params(tiny_config(Aggregator::kAttention), 2,
                                   tensors.input_dim(), 2, 77);
  const ForwardOutput base = forward(tensors, params);

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> perm(g.num_nodes);
    for (int v = 0; v < g.num_nodes; ++v) perm[v] = v;
    rng.shuffle(perm);

    HeteroGraph pg = g;
    for (int v = 0; v < g.num_nodes; ++v) {
      pg.node_type_of[perm[v]] = g.node_type_of[v];
      pg.labels[perm[v]] = g.labels[v];
    }
    pg.edges.clear();
    for (const auto& e : g.edges) pg.edges.push_back({perm[e.src], perm[e.dst], e.type});

    const GraphTensors pt = build_graph_tensors(pg, FeatureMode::kOneHotType);
    const ForwardOutput out = forward(pt, params);
    double worst = 0.0;
    for (int v = 0; v < g.num_nodes; ++v) {
      for (int j = 0; j < base.embeddings.cols(); ++j) {
        worst = std::max(worst,
                         std::fabs(out.embeddings.at(perm[v], j) - base.embeddings.at(v, j)));
      }
      for (int j = 0; j < base.probabilities.cols(); ++j) {
        worst = std::max(
            worst, std::fabs(out.probabilities.at(perm[v], j) - base.probabilities.at(v, j)));
      }
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("single-channel variant equals the reduced single-channel pipeline") {
  const HeteroGraph g = fixtures::small_hin();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  ModelConfig cfg = tiny_config(Aggregator::kSingle);
  cfg.single_channel = 1;
  ModelParams params = init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2, 31);

  // Reduced tensor set exposing only channel 1, with the parameters renamed.
  GraphTensors reduced;
  reduced.features = tensors.features;
  reduced.channel_ops = {tensors.channel_ops[1]};
  reduced.whole_op = tensors.whole_op;
  ModelParams reduced_params = params;
  reduced_params.num_channels = 1;
  reduced_params.config.single_channel = 0;
  for (ParamEntry& e : reduced_params.entries) {
    if (e.name == "conv.l1.t1.weight") e.name = "conv.l1.t0.weight";
    if (e.name == "conv.l2.t1.weight") e.name = "conv.l2.t0.weight";
  }

  ForwardArtifacts a = build_forward(tensors, params, false, 0);
  ForwardArtifacts b = build_forward(reduced, reduced_params, false, 0);
  CHECK(max_abs_diff(a.tape.value(a.embeddings), b.tape.value(b.embeddings)) == 0.0);
  CHECK(max_abs_diff(a.tape.value(a.probabilities), b.tape.value(b.probabilities)) == 0.0);
  // Structural equality: the recorded op sequences are identical.
  REQUIRE(a.tape.size() == b.tape.size());
  for (int i = 0; i < a.tape.size(); ++i) {
    CHECK(a.tape.node(i).kind == b.tape.node(i).kind);
    CHECK(a.tape.node(i).parents == b.tape.node(i).parents);
  }
}

TEST_CASE("channel-zero-complement: isolated nodes embed to zero without fusion") {
  const HeteroGraph g = fixtures::small_hin_with_isolated();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  for (Aggregator agg : {Aggregator::kAttention, Aggregator::kGated, Aggregator::kMean}) {
    ModelConfig cfg = tiny_config(agg, /*fusion=*/false);
    ModelParams params = init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2, 3);
    ForwardOutput out = forward(tensors, params);
    for (int j = 0; j < out.embeddings.cols(); ++j) {
      CHECK(out.embeddings.at(8, j) == 0.0);  // node 8 is isolated everywhere
    }
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  fixtures::TempDir dir("checkpoint");
  ModelConfig cfg = tiny_config(Aggregator::kGated);
  cfg.conv_order = 2;
  ModelParams params = init_params(cfg, 2, 7, 3, 99);
  save_checkpoint(params, FeatureMode::kOneHotId, dir.file("model.ckpt"));
  Checkpoint back = load_checkpoint(dir.file("model.ckpt"));

  CHECK(back.feature_mode == FeatureMode::kOneHotId);
  CHECK(back.params.config.num_layers == cfg.num_layers);
  CHECK(back.params.config.conv_order == 2);
  CHECK(back.params.config.aggregator == Aggregator::kGated);
  CHECK(back.params.num_channels == 2);
  CHECK(back.params.num_classes == 3);
  CHECK(back.params.input_dim == 7);
  REQUIRE(back.params.entries.size() == params.entries.size());
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    CHECK(back.params.entries[i].name == params.entries[i].name);
    CHECK(back.params.entries[i].weight_decay == params.entries[i].weight_decay);
    REQUIRE(back.params.entries[i].value.same_shape(params.entries[i].value));
    for (std::size_t e = 0; e < params.entries[i].value.size(); ++e) {
      CHECK(back.params.entries[i].value.data()[e] == params.entries[i].value.data()[e]);
    }
  }

  // Saving the loaded copy reproduces the file byte for byte.
  save_checkpoint(back.params, back.feature_mode, dir.file("model2.ckpt"));
  std::ifstream f1(dir.file("model.ckpt")), f2(dir.file("model2.ckpt"));
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}

TEST_CASE("config validation catches bad setups") {
  ModelConfig cfg = tiny_config(Aggregator::kSingle);
  cfg.single_channel = 5;
  CHECK_THROWS_AS(cfg.validate(2), ConfigError);
  ModelConfig bad_dims = tiny_config(Aggregator::kMean);
  bad_dims.hidden_dims = {4};
  CHECK_THROWS_AS(bad_dims.validate(2), ConfigError);
  ModelConfig shared = tiny_config(Aggregator::kAttention);
  shared.attention_shared = true;
  shared.hidden_dims = {4, 8};
  CHECK_THROWS_AS(shared.validate(2), ConfigError);
  ModelConfig ok_shared = tiny_config(Aggregator::kAttention);
  ok_shared.attention_shared = true;
  CHECK_NOTHROW(ok_shared.validate(2));
}

TEST_CASE("shared attention parameters are allocated once and used at every layer") {
  ModelConfig cfg = tiny_config(Aggregator::kAttention);
  cfg.attention_shared = true;
  ModelParams p = init_params(cfg, 2, 6, 2, 4);
  CHECK(p.index_of("att.shared.query") >= 0);
  CHECK(p.index_of("att.l1.query") < 0);
  CHECK(p.index_of("att.l2.query") < 0);
  const HeteroGraph g = fixtures::small_hin();
  const GraphTensors tensors = build_graph_tensors(g, FeatureMode::kOneHotId);
  ModelParams params = init_params(cfg, tensors.num_channels(), tensors.input_dim(), 2, 4);
  CHECK_NOTHROW(forward(tensors, params));
}
