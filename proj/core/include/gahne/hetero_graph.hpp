#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gahne/dense_matrix.hpp"
#include "gahne/sparse_matrix.hpp"

namespace gahne {

// Heterogeneous graph: typed nodes, typed undirected edges, optional dense
// features and optional class labels on a subset of nodes. Immutable after
// construction/validation; safe to share read-only across threads.
struct HeteroGraph {
  struct Edge {
    int src = 0;
    int dst = 0;
    int type = 0;
  };

  int num_nodes = 0;
  std::vector<int> node_type_of;             // size num_nodes
  std::vector<Edge> edges;
  std::vector<std::string> node_type_names;  // type ids in first-appearance order
  std::vector<std::string> edge_type_names;
  std::optional<DenseMatrix> features;       // N x D
  std::vector<int> labels;                   // size num_nodes, -1 = unlabeled
  int num_classes = 0;                       // labels cover [0, num_classes)

  int num_edge_types() const { return static_cast<int>(edge_type_names.size()); }
  int num_node_types() const { return static_cast<int>(node_type_names.size()); }
  std::vector<int> labeled_ids() const;

  // |node types| + |edge types| > 2. Enforced by the generator and the
  // model pipeline; plain file round-trips tolerate degenerate graphs.
  bool is_heterogeneous() const { return num_node_types() + num_edge_types() > 2; }

  // Checks id ranges, label contiguity and shape consistency. Throws
  // DataError on violation.
  void validate() const;
};

// One single-relation sub-network, indexed over the full node set so that
// nodes absent from the relation keep all-zero adjacency rows.
struct SubNetwork {
  int edge_type_id = 0;
  SparseMatrix adjacency;            // symmetrized, N x N
  std::vector<bool> participating;   // incident to at least one edge of this type
};

struct Split {
  std::vector<int> train_ids;
  std::vector<int> val_ids;
  std::vector<int> test_ids;
  uint64_t seed = 0;
};

enum class FeatureMode { kProvided, kOneHotId, kOneHotType };

// File ingestion. nodes: "<id>\t<type_name>" with consecutive ids from 0;
// edges: "<src>\t<dst>\t<type_name>"; features: "<id>\t<f_1> ... <f_D>";
// labels: "<id>\t<class_name>". Class and type ids are assigned in
// first-appearance order; class ids are remapped to a contiguous [0, C).
HeteroGraph load_graph(const std::string& nodes_path, const std::string& edges_path,
                       const std::string& features_path = "",
                       const std::string& labels_path = "");

// Writes a graph back in the load_graph file format. Empty label path skips
// the labels file; features are written only when present and a path given.
void save_graph(const HeteroGraph& g, const std::string& nodes_path,
                const std::string& edges_path, const std::string& labels_path = "",
                const std::string& features_path = "");

// Splits the graph into one sub-network per edge type, in edge-type-id
// order. Each input edge is stored in both directions.
std::vector<SubNetwork> decompose(const HeteroGraph& g);

// Input signal construction for featureless graphs: onehot-id is the N x N
// identity, onehot-type marks the node's type column.
DenseMatrix build_features(const HeteroGraph& g, FeatureMode mode);

// Uniform random partition of the labeled nodes, driven only by the seed.
Split make_splits(const HeteroGraph& g, int n_train, int n_val, uint64_t seed);

// Synthetic heterogeneous network with planted classes: labeled "target"
// nodes plus class-affiliated auxiliary node types, one edge type per
// auxiliary type. A target-auxiliary edge appears with intra_edge_prob when
// classes match and inter_edge_prob otherwise.
HeteroGraph synth_hin(int num_classes, int nodes_per_class, int num_aux_types,
                      double intra_edge_prob, double inter_edge_prob, uint64_t seed);

}  // namespace gahne
