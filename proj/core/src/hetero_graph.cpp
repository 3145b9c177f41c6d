#include "gahne/hetero_graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gahne/errors.hpp"
#include "gahne/rng.hpp"

namespace gahne {

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

[[noreturn]] void malformed(const std::string& path, int line_no, const std::string& why) {
  throw DataError(path + " line " + std::to_string(line_no) + ": " + why);
}

int intern(std::vector<std::string>& names, std::unordered_map<std::string, int>& index,
           const std::string& name) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  const int id = static_cast<int>(names.size());
  names.push_back(name);
  index.emplace(name, id);
  return id;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<int> HeteroGraph::labeled_ids() const {
  std::vector<int> ids;
  for (int v = 0; v < num_nodes; ++v) {
    if (labels[v] >= 0) ids.push_back(v);
  }
  return ids;
}

void HeteroGraph::validate() const {
  if (static_cast<int>(node_type_of.size()) != num_nodes) {
    throw DataError("graph: node type map size does not match node count");
  }
  for (int t : node_type_of) {
    if (t < 0 || t >= num_node_types()) throw DataError("graph: node type id out of range");
  }
  for (const Edge& e : edges) {
    if (e.src < 0 || e.src >= num_nodes || e.dst < 0 || e.dst >= num_nodes) {
      throw DataError("graph: edge references unknown node id");
    }
    if (e.type < 0 || e.type >= num_edge_types()) {
      throw DataError("graph: edge type id out of range");
    }
  }
  if (static_cast<int>(labels.size()) != num_nodes) {
    throw DataError("graph: label map size does not match node count");
  }
  std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
  for (int c : labels) {
    if (c == -1) continue;
    if (c < 0 || c >= num_classes) throw DataError("graph: class id outside [0, C)");
    seen[c] = true;
  }
  for (int c = 0; c < num_classes; ++c) {
    if (!seen[c]) throw DataError("graph: class range [0, C) is not contiguous");
  }
  if (features && (features->rows() != num_nodes)) {
    throw DataError("graph: feature row count does not match node count");
  }
}

HeteroGraph load_graph(const std::string& nodes_path, const std::string& edges_path,
                       const std::string& features_path, const std::string& labels_path) {
  HeteroGraph g;
  std::unordered_map<std::string, int> node_type_index;

  {
    std::ifstream in = open_or_throw(nodes_path);
    std::string line;
    int line_no = 0;
    std::vector<std::pair<int, int>> declared;  // (id, type)
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      long id = -1;
      std::string type_name;
      if (!(ss >> id >> type_name) || id < 0) malformed(nodes_path, line_no, "expected '<node_id>\\t<node_type_name>'");
      declared.emplace_back(static_cast<int>(id), intern(g.node_type_names, node_type_index, type_name));
    }
    g.num_nodes = static_cast<int>(declared.size());
    g.node_type_of.assign(g.num_nodes, -1);
    for (const auto& [id, type] : declared) {
      if (id >= g.num_nodes) {
        throw DataError(nodes_path + ": node ids are not consecutive from 0 (saw id " +
                        std::to_string(id) + " with " + std::to_string(g.num_nodes) + " nodes)");
      }
      if (g.node_type_of[id] != -1) {
        throw DataError(nodes_path + ": duplicate node id " + std::to_string(id));
      }
      g.node_type_of[id] = type;
    }
  }

  {
    std::ifstream in = open_or_throw(edges_path);
    std::unordered_map<std::string, int> edge_type_index;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      long src = -1, dst = -1;
      std::string type_name;
      if (!(ss >> src >> dst >> type_name)) {
        malformed(edges_path, line_no, "expected '<src_id>\\t<dst_id>\\t<edge_type_name>'");
      }
      if (src < 0 || src >= g.num_nodes || dst < 0 || dst >= g.num_nodes) {
        malformed(edges_path, line_no, "edge references unknown node id");
      }
      g.edges.push_back({static_cast<int>(src), static_cast<int>(dst),
                         intern(g.edge_type_names, edge_type_index, type_name)});
    }
  }

  g.labels.assign(g.num_nodes, -1);
  if (!labels_path.empty()) {
    std::ifstream in = open_or_throw(labels_path);
    std::unordered_map<std::string, int> class_index;
    std::vector<std::string> class_names;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      long id = -1;
      std::string class_name;
      if (!(ss >> id >> class_name)) malformed(labels_path, line_no, "expected '<node_id>\\t<class_name>'");
      if (id < 0 || id >= g.num_nodes) malformed(labels_path, line_no, "label references unknown node id");
      g.labels[id] = intern(class_names, class_index, class_name);
    }
    g.num_classes = static_cast<int>(class_names.size());
  }

  if (!features_path.empty()) {
    std::ifstream in = open_or_throw(features_path);
    std::string line;
    int line_no = 0;
    int dim = -1;
    DenseMatrix feats;
    std::vector<bool> filled(static_cast<std::size_t>(g.num_nodes), false);
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      long id = -1;
      if (!(ss >> id)) malformed(features_path, line_no, "expected '<node_id>\\t<f_1> ...'");
      if (id < 0 || id >= g.num_nodes) malformed(features_path, line_no, "feature row references unknown node id");
      std::vector<double> row;
      double x = 0.0;
      while (ss >> x) row.push_back(x);
      if (!ss.eof()) malformed(features_path, line_no, "non-numeric feature value");
      if (dim == -1) {
        dim = static_cast<int>(row.size());
        if (dim == 0) malformed(features_path, line_no, "empty feature row");
        feats = DenseMatrix(g.num_nodes, dim);
      }
      if (static_cast<int>(row.size()) != dim) {
        malformed(features_path, line_no,
                  "feature row length " + std::to_string(row.size()) + " != D=" + std::to_string(dim));
      }
      if (filled[id]) malformed(features_path, line_no, "duplicate feature row for node " + std::to_string(id));
      filled[id] = true;
      for (int j = 0; j < dim; ++j) feats.at(static_cast<int>(id), j) = row[j];
    }
    for (int v = 0; v < g.num_nodes; ++v) {
      if (!filled[v]) throw DataError(features_path + ": missing feature row for node " + std::to_string(v));
    }
    g.features = std::move(feats);
  }

  g.validate();
  return g;
}

void save_graph(const HeteroGraph& g, const std::string& nodes_path,
                const std::string& edges_path, const std::string& labels_path,
                const std::string& features_path) {
  {
    std::ofstream out(nodes_path);
    if (!out) throw DataError("cannot write file: " + nodes_path);
    for (int v = 0; v < g.num_nodes; ++v) {
      out << v << '\t' << g.node_type_names[g.node_type_of[v]] << '\n';
    }
  }
  {
    std::ofstream out(edges_path);
    if (!out) throw DataError("cannot write file: " + edges_path);
    for (const auto& e : g.edges) {
      out << e.src << '\t' << e.dst << '\t' << g.edge_type_names[e.type] << '\n';
    }
  }
  if (!labels_path.empty()) {
    std::ofstream out(labels_path);
    if (!out) throw DataError("cannot write file: " + labels_path);
    for (int v = 0; v < g.num_nodes; ++v) {
      if (g.labels[v] >= 0) out << v << '\t' << "class" << g.labels[v] << '\n';
    }
  }
  if (!features_path.empty() && g.features) {
    std::ofstream out(features_path);
    if (!out) throw DataError("cannot write file: " + features_path);
    for (int v = 0; v < g.num_nodes; ++v) {
      out << v;
      for (int j = 0; j < g.features->cols(); ++j) out << (j == 0 ? '\t' : ' ') << format_double(g.features->at(v, j));
      out << '\n';
    }
  }
}

std::vector<SubNetwork> decompose(const HeteroGraph& g) {
  std::vector<SubNetwork> subs(static_cast<std::size_t>(g.num_edge_types()));
  std::vector<std::vector<std::pair<int, int>>> per_type(subs.size());
  for (const auto& e : g.edges) per_type[e.type].emplace_back(e.src, e.dst);
  for (int t = 0; t < g.num_edge_types(); ++t) {
    SubNetwork& sub = subs[t];
    sub.edge_type_id = t;
    sub.adjacency = csr_from_edges(per_type[t], g.num_nodes, g.num_nodes, /*symmetrize=*/true);
    sub.participating.assign(static_cast<std::size_t>(g.num_nodes), false);
    for (const auto& [src, dst] : per_type[t]) {
      sub.participating[src] = true;
      sub.participating[dst] = true;
    }
  }
  return subs;
}

DenseMatrix build_features(const HeteroGraph& g, FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kProvided:
      if (!g.features) throw DataError("feature mode 'provided' but the graph has no features");
      return *g.features;
    case FeatureMode::kOneHotId:
      return DenseMatrix::identity(g.num_nodes);
    case FeatureMode::kOneHotType: {
      DenseMatrix x(g.num_nodes, g.num_node_types());
      for (int v = 0; v < g.num_nodes; ++v) x.at(v, g.node_type_of[v]) = 1.0;
      return x;
    }
  }
  throw ConfigError("build_features: unknown mode");
}

Split make_splits(const HeteroGraph& g, int n_train, int n_val, uint64_t seed) {
  std::vector<int> ids = g.labeled_ids();
  if (n_train < 0 || n_val < 0 || n_train + n_val > static_cast<int>(ids.size())) {
    throw DataError("make_splits: too few labeled nodes (" + std::to_string(ids.size()) +
                    ") for n_train=" + std::to_string(n_train) + " n_val=" + std::to_string(n_val));
  }
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(ids);
  Split split;
  split.seed = seed;
  split.train_ids.assign(ids.begin(), ids.begin() + n_train);
  split.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test_ids.assign(ids.begin() + n_train + n_val, ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.val_ids.begin(), split.val_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

HeteroGraph synth_hin(int num_classes, int nodes_per_class, int num_aux_types,
                      double intra_edge_prob, double inter_edge_prob, uint64_t seed) {
  if (num_classes <= 0) throw ConfigError("synth_hin: need at least one class");
  if (nodes_per_class <= 0) throw ConfigError("synth_hin: need at least one node per class");
  if (num_aux_types <= 0) {
    throw ConfigError("synth_hin: need at least one auxiliary type (heterogeneity condition)");
  }
  for (double p : {intra_edge_prob, inter_edge_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synth_hin: edge probability outside [0, 1]");
  }

  HeteroGraph g;
  const int num_targets = num_classes * nodes_per_class;
  const int aux_per_type = num_classes * nodes_per_class;
  g.num_nodes = num_targets + num_aux_types * aux_per_type;
  g.node_type_of.assign(g.num_nodes, 0);
  g.labels.assign(g.num_nodes, -1);
  g.num_classes = num_classes;
  g.node_type_names.push_back("target");
  for (int a = 0; a < num_aux_types; ++a) {
    g.node_type_names.push_back("aux" + std::to_string(a));
    g.edge_type_names.push_back("rel" + std::to_string(a));
  }

  // Targets come first; class blocks are contiguous for both targets and
  // auxiliaries (splits shuffle later).
  for (int v = 0; v < num_targets; ++v) g.labels[v] = v / nodes_per_class;
  for (int a = 0; a < num_aux_types; ++a) {
    const int base = num_targets + a * aux_per_type;
    for (int j = 0; j < aux_per_type; ++j) g.node_type_of[base + j] = 1 + a;
  }

  Rng rng(derive_seed(seed, "synth-hin"));
  for (int a = 0; a < num_aux_types; ++a) {
    const int base = num_targets + a * aux_per_type;
    for (int v = 0; v < num_targets; ++v) {
      const int target_class = g.labels[v];
      for (int j = 0; j < aux_per_type; ++j) {
        const int aux_class = j / nodes_per_class;
        const double p = (target_class == aux_class) ? intra_edge_prob : inter_edge_prob;
        if (rng.next_double() < p) g.edges.push_back({v, base + j, a});
      }
    }
  }

  g.validate();
  return g;
}

}  // namespace gahne
