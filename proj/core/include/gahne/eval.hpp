#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gahne/dense_matrix.hpp"

namespace gahne {

// Majority vote among the k nearest reference rows under Euclidean distance.
// Distance ties resolve to the lower reference index, vote ties to the
// lowest class id.
std::vector<int> knn_predict(const DenseMatrix& reference, const std::vector<int>& reference_labels,
                             const DenseMatrix& queries, int k);

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
};

// Per-class F1 with 0/0 := 0; macro is the unweighted class mean, micro is
// computed from pooled counts (equal to accuracy for single-label input).
F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& truth,
                   int num_classes);

// Lloyd's algorithm with k-means++ seeding; runs to an assignment fixpoint
// or max_iters. Empty clusters are reseeded to the farthest point. When
// given, objective_trace receives the within-cluster sum of squares after
// each assignment step.
std::vector<int> kmeans(const DenseMatrix& points, int k, uint64_t seed, int max_iters = 300,
                        std::vector<double>* objective_trace = nullptr);

// Normalized mutual information I(a;b)/sqrt(H(a) H(b)) with natural logs;
// 0 when either marginal entropy is 0.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

// Adjusted Rand index by pair counting; 1 when the degenerate denominator
// vanishes (identical trivial partitions).
double ari(const std::vector<int>& a, const std::vector<int>& b);

struct MetricStat {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation over repeats
};

struct ClassificationRow {
  double fraction = 0.0;
  MetricStat macro_f1;
  MetricStat micro_f1;
};

struct ClusteringResult {
  MetricStat nmi;
  MetricStat ari;
};

// For each fraction f and repeat r, splits the test-node embeddings into an
// f-sized KNN reference and a scored remainder, then averages Macro/Micro-F1
// over repeats. Trial seeds derive from (seed, fraction index, repeat).
std::vector<ClassificationRow> run_classification_eval(
    const DenseMatrix& embeddings, const std::vector<int>& labels,
    const std::vector<int>& test_ids, const std::vector<double>& fractions, int repeats,
    uint64_t seed, int knn_k);

// K-means over the labeled-node embeddings with k = #classes, scored by
// NMI/ARI against ground truth and averaged over repeats.
ClusteringResult run_clustering_eval(const DenseMatrix& embeddings,
                                     const std::vector<int>& labels, int repeats, uint64_t seed);

struct EvalReport {
  std::vector<ClassificationRow> classification;
  ClusteringResult clustering;
  int repeats = 0;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config_echo;

  void write_csv(std::ostream& out) const;
};

}  // namespace gahne
