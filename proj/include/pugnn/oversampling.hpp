#pragma once

// GraphSMOTE-style oversampling: synthetic labeled-positive nodes are
// interpolated between nearest labeled positives in embedding space, and a
// bilinear link generator trained on observed edges wires them into the
// graph. Augmentation always returns a new graph; the input is never
// mutated, and training-time augmentation never leaks into evaluation.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "pugnn/graph_layers.hpp"
#include "pugnn/rng.hpp"
#include "pugnn/tensor.hpp"

namespace pugnn {

struct SyntheticNode {
  int parent_a = 0;
  int parent_b = 0;
  double lambda = 0.0;  // embedding = (1-lambda) x_a + lambda x_b
  std::vector<double> embedding;
};

// Interpolated minority nodes until labeled positives reach target_ratio of
// the (real + synthetic) population. parent_b is drawn among parent_a's k
// nearest labeled positives by Euclidean distance.
inline std::vector<SyntheticNode> smote_nodes(const Mat& embeddings, const std::vector<int>& labels,
                                              double target_ratio, int k, Rng& rng) {
  if (static_cast<int>(labels.size()) != embeddings.rows)
    throw std::invalid_argument("smote_nodes: one label per embedding row required");
  if (k < 1) throw std::invalid_argument("smote_nodes: k must be >= 1");
  if (!(target_ratio > 0.0 && target_ratio < 1.0))
    throw std::invalid_argument("smote_nodes: target_ratio must lie in (0,1)");

  std::vector<int> positives;
  for (int i = 0; i < embeddings.rows; ++i)
    if (labels[i] == 1) positives.push_back(i);
  if (positives.size() < 2) throw std::runtime_error("smote_nodes: insufficient minority samples");

  const int total = embeddings.rows;
  const int have = static_cast<int>(positives.size());
  int need = 0;
  if (static_cast<double>(have) / total < target_ratio)
    need = static_cast<int>(std::ceil((target_ratio * total - have) / (1.0 - target_ratio)));

  // k nearest labeled positives per labeled positive
  const int kk = std::min<int>(k, have - 1);
  std::vector<std::vector<int>> nearest(positives.size());
  for (size_t a = 0; a < positives.size(); ++a) {
    std::vector<std::pair<double, int>> by_dist;
    for (size_t b = 0; b < positives.size(); ++b) {
      if (a == b) continue;
      double d2 = 0.0;
      const double* ra = embeddings.row_ptr(positives[a]);
      const double* rb = embeddings.row_ptr(positives[b]);
      for (int c = 0; c < embeddings.cols; ++c) {
        double d = ra[c] - rb[c];
        d2 += d * d;
      }
      by_dist.push_back({d2, positives[b]});
    }
    std::sort(by_dist.begin(), by_dist.end());
    for (int j = 0; j < kk; ++j) nearest[a].push_back(by_dist[j].second);
  }

  std::vector<SyntheticNode> out;
  out.reserve(need);
  for (int s = 0; s < need; ++s) {
    int ai = rng.uniform_int(have);
    SyntheticNode node;
    node.parent_a = positives[ai];
    node.parent_b = nearest[ai][rng.uniform_int(kk)];
    node.lambda = rng.uniform();
    node.embedding.resize(embeddings.cols);
    const double* ra = embeddings.row_ptr(node.parent_a);
    const double* rb = embeddings.row_ptr(node.parent_b);
    for (int c = 0; c < embeddings.cols; ++c)
      node.embedding[c] = (1.0 - node.lambda) * ra[c] + node.lambda * rb[c];
    out.push_back(std::move(node));
  }
  return out;
}

// Bilinear edge scorer s(u, v) = sigmoid(x_u^T W x_v).
struct LinkGeneratorParams {
  Mat weight;  // F x F
  double threshold = 0.5;

  void init(int f) { weight = Mat(f, f, 0.0); }

  double score(const double* xu, const double* xv) const {
    double s = 0.0;
    for (int i = 0; i < weight.rows; ++i) {
      if (xu[i] == 0.0) continue;
      const double* wr = weight.row_ptr(i);
      double inner = 0.0;
      for (int j = 0; j < weight.cols; ++j) inner += wr[j] * xv[j];
      s += xu[i] * inner;
    }
    return stable_sigmoid(s);
  }

  double score(const Mat& emb, int u, int v) const { return score(emb.row_ptr(u), emb.row_ptr(v)); }
};

// Logistic regression on observed edges vs uniformly sampled non-edges
// (1:1 per epoch), full-batch gradient steps.
inline LinkGeneratorParams train_link_generator(const GraphView& graph, const Mat& embeddings,
                                                LinkGeneratorParams params, int epochs, Rng& rng,
                                                double learning_rate = 0.5) {
  graph.check();
  if (graph.num_edges() == 0) throw std::runtime_error("train_link_generator: empty edge set");
  if (embeddings.rows != graph.num_nodes)
    throw std::invalid_argument("train_link_generator: embedding rows must match node count");
  const int F = embeddings.cols;
  if (params.weight.rows != F) params.init(F);

  const int E = graph.num_edges();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Mat grad(F, F);
    auto accumulate = [&](int u, int v, double label) {
      double s = params.score(embeddings, u, v);
      double coef = (s - label) / (2.0 * E);
      const double* xu = embeddings.row_ptr(u);
      const double* xv = embeddings.row_ptr(v);
      for (int i = 0; i < F; ++i) {
        if (xu[i] == 0.0) continue;
        double* gr = grad.row_ptr(i);
        double c = coef * xu[i];
        for (int j = 0; j < F; ++j) gr[j] += c * xv[j];
      }
    };
    for (int e = 0; e < E; ++e) accumulate(graph.src[e], graph.dst[e], 1.0);
    for (int e = 0; e < E; ++e) {
      int u = rng.uniform_int(graph.num_nodes);
      int v = rng.uniform_int(graph.num_nodes - 1);
      if (v >= u) ++v;
      accumulate(u, v, 0.0);
    }
    axpy_inplace(params.weight, -learning_rate, grad);
  }
  return params;
}

// Mean feature vector over all edges incident to either parent; zero when
// the parents are isolated.
inline std::vector<double> synthetic_edge_features(const GraphView& graph, int parent_a, int parent_b) {
  std::vector<double> mean(graph.edge_feat.cols, 0.0);
  int count = 0;
  for (int e = 0; e < graph.num_edges(); ++e) {
    if (graph.src[e] == parent_a || graph.dst[e] == parent_a || graph.src[e] == parent_b ||
        graph.dst[e] == parent_b) {
      for (int c = 0; c < graph.edge_feat.cols; ++c) mean[c] += graph.edge_feat(e, c);
      ++count;
    }
  }
  if (count > 0)
    for (double& v : mean) v /= count;
  return mean;
}

struct AugmentedGraph {
  GraphView graph;            // original nodes first, then one node per synthetic
  int num_original_nodes = 0;
  int num_synthetic = 0;
};

// Wires each synthetic node to the existing nodes scoring above the
// threshold, keeping at most max_degree highest-scoring targets. Synthetic
// nodes may stay isolated. Edges run synthetic -> target.
inline AugmentedGraph wire_synthetic_nodes(const GraphView& graph, const Mat& embeddings,
                                           const std::vector<SyntheticNode>& synthetic,
                                           const LinkGeneratorParams& link, int max_degree) {
  graph.check();
  if (max_degree < 0) throw std::invalid_argument("wire_synthetic_nodes: max_degree must be >= 0");
  AugmentedGraph out;
  out.num_original_nodes = graph.num_nodes;
  out.num_synthetic = static_cast<int>(synthetic.size());
  out.graph.num_nodes = graph.num_nodes + out.num_synthetic;
  out.graph.src = graph.src;
  out.graph.dst = graph.dst;

  std::vector<std::vector<double>> new_feats;
  for (size_t s = 0; s < synthetic.size(); ++s) {
    const auto& node = synthetic[s];
    std::vector<std::pair<double, int>> candidates;
    for (int v = 0; v < graph.num_nodes; ++v) {
      double sc = link.score(node.embedding.data(), embeddings.row_ptr(v));
      if (sc > link.threshold) candidates.push_back({-sc, v});
    }
    std::sort(candidates.begin(), candidates.end());
    if (static_cast<int>(candidates.size()) > max_degree) candidates.resize(max_degree);
    std::vector<double> feat = synthetic_edge_features(graph, node.parent_a, node.parent_b);
    for (const auto& [neg_score, v] : candidates) {
      out.graph.src.push_back(graph.num_nodes + static_cast<int>(s));
      out.graph.dst.push_back(v);
      new_feats.push_back(feat);
    }
  }

  out.graph.edge_feat = Mat(graph.num_edges() + static_cast<int>(new_feats.size()), graph.edge_feat.cols);
  for (int e = 0; e < graph.num_edges(); ++e)
    std::copy(graph.edge_feat.row_ptr(e), graph.edge_feat.row_ptr(e) + graph.edge_feat.cols,
              out.graph.edge_feat.row_ptr(e));
  for (size_t e = 0; e < new_feats.size(); ++e)
    std::copy(new_feats[e].begin(), new_feats[e].end(),
              out.graph.edge_feat.row_ptr(graph.num_edges() + static_cast<int>(e)));
  return out;
}

}  // namespace pugnn
