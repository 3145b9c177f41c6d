#pragma once

// Straight-line dense re-implementation of the model pipeline used as an
// independent oracle. Everything here is naive loops over
// vector<vector<double>>: no tape, no CSR, no shared kernels with the
// implementation under test.

#include <cassert>
#include <cmath>
#include <vector>

#include "gahne/hetero_graph.hpp"
#include "gahne/model.hpp"

namespace refimpl {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(int r, int c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat from_dense(const gahne::DenseMatrix& m) {
  Mat out = zeros(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out[i][j] = m.at(i, j);
  }
  return out;
}

inline Mat mul(const Mat& a, const Mat& b) {
  const int n = static_cast<int>(a.size());
  const int k = static_cast<int>(b.size());
  const int m = static_cast<int>(b[0].size());
  Mat c = zeros(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += a[i][t] * b[t][j];
      c[i][j] = acc;
    }
  }
  return c;
}

inline Mat addm(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c[i].size(); ++j) c[i][j] += b[i][j];
  }
  return c;
}

inline Mat relu(const Mat& a) {
  Mat c = a;
  for (auto& row : c) {
    for (double& v : row) v = v > 0.0 ? v : 0.0;
  }
  return c;
}

inline Mat softmax_rows(const Mat& a) {
  Mat c = a;
  for (auto& row : c) {
    double hi = row[0];
    for (double v : row) hi = std::max(hi, v);
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - hi);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return c;
}

// Dense symmetrized, row-normalized propagation operator for one relation
// (or all relations when edge_type < 0).
inline Mat dense_operator(const gahne::HeteroGraph& g, int edge_type) {
  Mat a = zeros(g.num_nodes, g.num_nodes);
  for (const auto& e : g.edges) {
    if (edge_type >= 0 && e.type != edge_type) continue;
    a[e.src][e.dst] += 1.0;
    a[e.dst][e.src] += 1.0;
  }
  for (auto& row : a) {
    double degree = 0.0;
    for (double v : row) degree += v;
    if (degree == 0.0) continue;
    for (double& v : row) v /= degree;
  }
  return a;
}

// H = relu(sum_{k=1..K} P^k Z Theta), powers applied as repeated dense
// products.
inline Mat conv_layer(const Mat& p, const Mat& z, const Mat& theta, int order) {
  Mat propagated = mul(p, z);
  Mat total = mul(propagated, theta);
  for (int k = 2; k <= order; ++k) {
    propagated = mul(p, propagated);
    total = addm(total, mul(propagated, theta));
  }
  return relu(total);
}

struct Reference {
  Mat embeddings;
  Mat probabilities;
};

// Evaluation-mode forward (no dropout), reading parameters by name from the
// trained ModelParams.
inline Reference reference_forward(const gahne::HeteroGraph& g, const gahne::ModelParams& params,
                                   const Mat& x) {
  const gahne::ModelConfig& cfg = params.config;
  const int num_channels = g.num_edge_types();

  std::vector<Mat> channel_ops;
  for (int t = 0; t < num_channels; ++t) channel_ops.push_back(dense_operator(g, t));
  const Mat whole_op = dense_operator(g, -1);

  const auto p = [&](const std::string& name) { return from_dense(params.at(name)); };
  const auto ltag = [](int l) { return "l" + std::to_string(l + 1); };

  Mat channel_out;
  if (cfg.channels_enabled) {
    Mat z = x;
    for (int l = 0; l < cfg.num_layers; ++l) {
      std::vector<Mat> hs;
      std::vector<int> ts;
      for (int t = 0; t < num_channels; ++t) {
        if (cfg.aggregator == gahne::Aggregator::kSingle && t != cfg.single_channel) continue;
        hs.push_back(conv_layer(channel_ops[t], z,
                                p("conv." + ltag(l) + ".t" + std::to_string(t) + ".weight"),
                                cfg.conv_order));
        ts.push_back(t);
      }
      const int n = static_cast<int>(hs[0].size());
      const int d = static_cast<int>(hs[0][0].size());
      switch (cfg.aggregator) {
        case gahne::Aggregator::kAttention: {
          const std::string tag = cfg.attention_shared ? "shared" : ltag(l);
          const Mat w = p("att." + tag + ".weight");   // d x d_q
          const Mat q = p("att." + tag + ".query");    // d_q x 1
          const Mat b = p("att." + tag + ".bias");     // 1 x d_q
          const int dq = static_cast<int>(w[0].size());
          std::vector<double> scores;
          for (const Mat& h : hs) {
            double score = 0.0;
            for (int v = 0; v < n; ++v) {
              for (int a = 0; a < dq; ++a) {
                double pre = b[0][a];
                for (int j = 0; j < d; ++j) pre += h[v][j] * w[j][a];
                score += q[a][0] * std::tanh(pre);
              }
            }
            scores.push_back(score);
          }
          double hi = scores[0];
          for (double s : scores) hi = std::max(hi, s);
          double total = 0.0;
          std::vector<double> mu;
          for (double s : scores) {
            mu.push_back(std::exp(s - hi));
            total += mu.back();
          }
          for (double& m : mu) m /= total;
          Mat out = zeros(n, d);
          for (std::size_t t = 0; t < hs.size(); ++t) {
            for (int v = 0; v < n; ++v) {
              for (int j = 0; j < d; ++j) out[v][j] += mu[t] * hs[t][v][j];
            }
          }
          z = out;
          break;
        }
        case gahne::Aggregator::kGated: {
          Mat out = zeros(n, d);
          for (std::size_t i = 0; i < hs.size(); ++i) {
            const Mat wt =
                p("gate." + ltag(l) + ".t" + std::to_string(ts[i]) + ".weight");
            for (int v = 0; v < n; ++v) {
              for (int j = 0; j < d; ++j) {
                double pre = 0.0;
                for (int a = 0; a < d; ++a) pre += hs[i][v][a] * wt[a][j];
                out[v][j] += hs[i][v][j] / (1.0 + std::exp(-pre));
              }
            }
          }
          z = out;
          break;
        }
        case gahne::Aggregator::kPooling: {
          const Mat w = p("pool." + ltag(l) + ".weight");
          const Mat b = p("pool." + ltag(l) + ".bias");
          Mat out = zeros(n, d);
          for (const Mat& h : hs) {
            for (int v = 0; v < n; ++v) {
              for (int j = 0; j < d; ++j) {
                double pre = b[0][j];
                for (int a = 0; a < d; ++a) pre += h[v][a] * w[a][j];
                out[v][j] += pre > 0.0 ? pre : 0.0;
              }
            }
          }
          for (auto& row : out) {
            for (double& v : row) v /= static_cast<double>(hs.size());
          }
          z = out;
          break;
        }
        case gahne::Aggregator::kMean: {
          Mat out = zeros(n, d);
          for (const Mat& h : hs) {
            for (int v = 0; v < n; ++v) {
              for (int j = 0; j < d; ++j) out[v][j] += h[v][j];
            }
          }
          for (auto& row : out) {
            for (double& v : row) v /= static_cast<double>(hs.size());
          }
          z = out;
          break;
        }
        case gahne::Aggregator::kSingle:
          z = hs[0];
          break;
      }
    }
    channel_out = z;
  } else {
    Mat z = x;
    for (int l = 0; l < cfg.num_layers; ++l) {
      z = conv_layer(whole_op, z, p("alt." + ltag(l) + ".weight"), cfg.conv_order);
    }
    channel_out = z;
  }

  Mat embeddings;
  if (cfg.fusion_enabled) {
    Mat zw = x;
    for (int l = 0; l < cfg.num_layers; ++l) {
      zw = conv_layer(whole_op, zw, p("global." + ltag(l) + ".weight"), cfg.conv_order);
    }
    const int n = static_cast<int>(channel_out.size());
    const int d = static_cast<int>(channel_out[0].size());
    Mat fused = zeros(n, 2 * d);
    for (int v = 0; v < n; ++v) {
      for (int j = 0; j < d; ++j) {
        fused[v][j] = channel_out[v][j];
        fused[v][d + j] = zw[v][j];
      }
    }
    const Mat wfc = p("fusion.weight");  // 2d x d
    const Mat bfc = p("fusion.bias");
    Mat e = zeros(n, d);
    for (int v = 0; v < n; ++v) {
      for (int j = 0; j < d; ++j) {
        double pre = bfc[0][j];
        for (int a = 0; a < 2 * d; ++a) pre += fused[v][a] * wfc[a][j];
        e[v][j] = pre > 0.0 ? pre : 0.0;
      }
    }
    embeddings = e;
  } else {
    embeddings = channel_out;
  }

  Reference out;
  out.embeddings = embeddings;
  out.probabilities = softmax_rows(mul(embeddings, p("classifier.weight")));
  return out;
}

}  // namespace refimpl
