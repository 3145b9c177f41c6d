#include "gahne/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "gahne/errors.hpp"
#include "gahne/rng.hpp"

namespace gahne {

namespace {

double squared_distance(const double* a, const double* b, int dim) {
  double total = 0.0;
  for (int j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    total += d * d;
  }
  return total;
}

MetricStat summarize(const std::vector<double>& samples) {
  MetricStat stat;
  if (samples.empty()) return stat;
  for (double s : samples) stat.mean += s;
  stat.mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double s : samples) var += (s - stat.mean) * (s - stat.mean);
  stat.sd = std::sqrt(var / static_cast<double>(samples.size()));
  return stat;
}

}  // namespace

std::vector<int> knn_predict(const DenseMatrix& reference, const std::vector<int>& reference_labels,
                             const DenseMatrix& queries, int k) {
  if (reference.rows() == 0) throw DataError("knn_predict: empty reference set");
  if (k < 1 || k > reference.rows()) {
    throw DataError("knn_predict: k must be in [1, |reference|]");
  }
  if (static_cast<int>(reference_labels.size()) != reference.rows()) {
    throw DataError("knn_predict: label count does not match reference rows");
  }
  if (reference.cols() != queries.cols()) throw DataError("knn_predict: dimension mismatch");

  int num_classes = 0;
  for (int c : reference_labels) num_classes = std::max(num_classes, c + 1);

  std::vector<int> out(queries.rows());
  std::vector<std::pair<double, int>> dist(reference.rows());
  std::vector<int> votes(static_cast<std::size_t>(num_classes));
  for (int q = 0; q < queries.rows(); ++q) {
    for (int r = 0; r < reference.rows(); ++r) {
      dist[r] = {squared_distance(queries.row(q), reference.row(r), queries.cols()), r};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (int i = 0; i < k; ++i) votes[reference_labels[dist[i].second]] += 1;
    int best = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    out[q] = best;
  }
  return out;
}

F1Scores f1_scores(const std::vector<int>& predicted, const std::vector<int>& truth,
                   int num_classes) {
  if (predicted.size() != truth.size()) throw DataError("f1_scores: length mismatch");
  std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i];
    const int t = truth[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes) {
      throw DataError("f1_scores: label outside [0, C)");
    }
    if (p == t) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  F1Scores scores;
  long tp_total = 0, fp_total = 0, fn_total = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    scores.macro += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / denom;
    tp_total += tp[c];
    fp_total += fp[c];
    fn_total += fn[c];
  }
  scores.macro /= static_cast<double>(num_classes);
  const double micro_denom = static_cast<double>(2 * tp_total + fp_total + fn_total);
  scores.micro = micro_denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp_total) / micro_denom;
  return scores;
}

std::vector<int> kmeans(const DenseMatrix& points, int k, uint64_t seed, int max_iters,
                        std::vector<double>* objective_trace) {
  const int n = points.rows();
  const int dim = points.cols();
  if (k < 1 || k > n) throw DataError("kmeans: k must be in [1, N]");
  if (objective_trace) objective_trace->clear();

  Rng rng(derive_seed(seed, "kmeans"));
  DenseMatrix centers(k, dim);
  std::vector<double> nearest(static_cast<std::size_t>(n));

  // k-means++ seeding: each next center is drawn with probability
  // proportional to squared distance from the chosen set.
  {
    const int first = static_cast<int>(rng.next_below(n));
    for (int j = 0; j < dim; ++j) centers.at(0, j) = points.at(first, j);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        double best = squared_distance(points.row(i), centers.row(0), dim);
        for (int cc = 1; cc < c; ++cc) {
          best = std::min(best, squared_distance(points.row(i), centers.row(cc), dim));
        }
        nearest[i] = best;
        total += best;
      }
      int chosen;
      if (total > 0.0) {
        const double target = rng.next_double() * total;
        double acc = 0.0;
        chosen = n - 1;
        for (int i = 0; i < n; ++i) {
          acc += nearest[i];
          if (acc > target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = static_cast<int>(rng.next_below(n));
      }
      for (int j = 0; j < dim; ++j) centers.at(c, j) = points.at(chosen, j);
    }
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = squared_distance(points.row(i), centers.row(0), dim);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points.row(i), centers.row(c), dim);
        if (d < best_dist) {
          best_dist = d;
          best = c;
        }
      }
      nearest[i] = best_dist;
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (objective_trace) {
      double objective = 0.0;
      for (int i = 0; i < n; ++i) objective += nearest[i];
      objective_trace->push_back(objective);
    }
    if (!changed && iter > 0) break;

    std::fill(counts.begin(), counts.end(), 0);
    for (double& v : centers.data()) v = 0.0;
    for (int i = 0; i < n; ++i) {
      counts[assignment[i]] += 1;
      for (int j = 0; j < dim; ++j) centers.at(assignment[i], j) += points.at(i, j);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (int j = 0; j < dim; ++j) centers.at(c, j) /= static_cast<double>(counts[c]);
      } else {
        // Reseed an empty cluster to the point farthest from its center.
        int farthest = 0;
        for (int i = 1; i < n; ++i) {
          if (nearest[i] > nearest[farthest]) farthest = i;
        }
        for (int j = 0; j < dim; ++j) centers.at(c, j) = points.at(farthest, j);
        nearest[farthest] = 0.0;
      }
    }
  }
  return assignment;
}

namespace {

struct Contingency {
  std::vector<std::vector<long>> table;  // classes(a) x classes(b)
  std::vector<long> row_sums;
  std::vector<long> col_sums;
  long total = 0;
};

Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DataError("partition metrics: length mismatch");
  int na = 0, nb = 0;
  for (int x : a) na = std::max(na, x + 1);
  for (int x : b) nb = std::max(nb, x + 1);
  Contingency c;
  c.table.assign(na, std::vector<long>(nb, 0));
  c.row_sums.assign(na, 0);
  c.col_sums.assign(nb, 0);
  c.total = static_cast<long>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0) throw DataError("partition metrics: negative label");
    c.table[a[i]][b[i]] += 1;
    c.row_sums[a[i]] += 1;
    c.col_sums[b[i]] += 1;
  }
  return c;
}

double entropy(const std::vector<long>& counts, long total) {
  double h = 0.0;
  for (long c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double pairs(long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const Contingency c = contingency(a, b);
  if (c.total == 0) return 0.0;
  const double ha = entropy(c.row_sums, c.total);
  const double hb = entropy(c.col_sums, c.total);
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  const double n = static_cast<double>(c.total);
  for (std::size_t i = 0; i < c.table.size(); ++i) {
    for (std::size_t j = 0; j < c.table[i].size(); ++j) {
      const long nij = c.table[i][j];
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / n;
      const double pi = static_cast<double>(c.row_sums[i]) / n;
      const double qj = static_cast<double>(c.col_sums[j]) / n;
      mi += pij * std::log(pij / (pi * qj));
    }
  }
  return mi / std::sqrt(ha * hb);
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
  const Contingency c = contingency(a, b);
  if (c.total == 0) return 1.0;
  double index = 0.0;
  for (const auto& row : c.table) {
    for (long nij : row) index += pairs(nij);
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (long s : c.row_sums) sum_a += pairs(s);
  for (long s : c.col_sums) sum_b += pairs(s);
  const double all_pairs = pairs(c.total);
  const double expected = all_pairs == 0.0 ? 0.0 : sum_a * sum_b / all_pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;  // both trivial partitions
  return (index - expected) / denom;
}

std::vector<ClassificationRow> run_classification_eval(
    const DenseMatrix& embeddings, const std::vector<int>& labels,
    const std::vector<int>& test_ids, const std::vector<double>& fractions, int repeats,
    uint64_t seed, int knn_k) {
  if (repeats < 1) throw ConfigError("classification eval: repeats must be >= 1");
  for (int v : test_ids) {
    if (v < 0 || v >= embeddings.rows() || labels[v] < 0) {
      throw DataError("classification eval: test id " + std::to_string(v) + " is not labeled");
    }
  }
  const int n = static_cast<int>(test_ids.size());
  const int dim = embeddings.cols();

  std::vector<ClassificationRow> rows;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const double fraction = fractions[fi];
    const int n_ref = static_cast<int>(std::lround(fraction * n));
    if (n_ref < knn_k || n_ref >= n) {
      throw DataError("classification eval: fraction " + std::to_string(fraction) +
                      " yields a reference set smaller than k or an empty scored set");
    }
    std::vector<double> macros, micros;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(derive_seed(seed, "classification", fi), "repeat", r));
      std::vector<int> order = test_ids;
      rng.shuffle(order);
      DenseMatrix ref(n_ref, dim), query(n - n_ref, dim);
      std::vector<int> ref_labels(n_ref), query_labels(n - n_ref);
      for (int i = 0; i < n_ref; ++i) {
        for (int j = 0; j < dim; ++j) ref.at(i, j) = embeddings.at(order[i], j);
        ref_labels[i] = labels[order[i]];
      }
      for (int i = n_ref; i < n; ++i) {
        for (int j = 0; j < dim; ++j) query.at(i - n_ref, j) = embeddings.at(order[i], j);
        query_labels[i - n_ref] = labels[order[i]];
      }
      int num_classes = 0;
      for (int v : test_ids) num_classes = std::max(num_classes, labels[v] + 1);
      const std::vector<int> pred = knn_predict(ref, ref_labels, query, knn_k);
      const F1Scores scores = f1_scores(pred, query_labels, num_classes);
      macros.push_back(scores.macro);
      micros.push_back(scores.micro);
    }
    ClassificationRow row;
    row.fraction = fraction;
    row.macro_f1 = summarize(macros);
    row.micro_f1 = summarize(micros);
    rows.push_back(row);
  }
  return rows;
}

ClusteringResult run_clustering_eval(const DenseMatrix& embeddings,
                                     const std::vector<int>& labels, int repeats,
                                     uint64_t seed) {
  if (repeats < 1) throw ConfigError("clustering eval: repeats must be >= 1");
  std::vector<int> ids;
  int num_classes = 0;
  for (int v = 0; v < static_cast<int>(labels.size()); ++v) {
    if (labels[v] >= 0) {
      ids.push_back(v);
      num_classes = std::max(num_classes, labels[v] + 1);
    }
  }
  if (static_cast<int>(ids.size()) < num_classes || num_classes == 0) {
    throw DataError("clustering eval: need at least C labeled nodes");
  }
  DenseMatrix points(static_cast<int>(ids.size()), embeddings.cols());
  std::vector<int> truth(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int j = 0; j < embeddings.cols(); ++j) {
      points.at(static_cast<int>(i), j) = embeddings.at(ids[i], j);
    }
    truth[i] = labels[ids[i]];
  }
  std::vector<double> nmis, aris;
  for (int r = 0; r < repeats; ++r) {
    const std::vector<int> clusters =
        kmeans(points, num_classes, derive_seed(seed, "clustering", r));
    nmis.push_back(nmi(clusters, truth));
    aris.push_back(ari(clusters, truth));
  }
  return {summarize(nmis), summarize(aris)};
}

void EvalReport::write_csv(std::ostream& out) const {
  char buf[160];
  out << "# seed " << seed << " repeats " << repeats << "\n";
  for (const auto& [key, value] : config_echo) out << "# " << key << " " << value << "\n";
  out << "section,fraction,metric,mean,sd\n";
  for (const ClassificationRow& row : classification) {
    std::snprintf(buf, sizeof(buf), "classification,%g,macro_f1,%.9g,%.9g\n", row.fraction,
                  row.macro_f1.mean, row.macro_f1.sd);
    out << buf;
    std::snprintf(buf, sizeof(buf), "classification,%g,micro_f1,%.9g,%.9g\n", row.fraction,
                  row.micro_f1.mean, row.micro_f1.sd);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "clustering,,nmi,%.9g,%.9g\n", clustering.nmi.mean,
                clustering.nmi.sd);
  out << buf;
  std::snprintf(buf, sizeof(buf), "clustering,,ari,%.9g,%.9g\n", clustering.ari.mean,
                clustering.ari.sd);
  out << buf;
}

}  // namespace gahne
