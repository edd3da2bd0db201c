#pragma once

// Edge-featured GATv2-style attention layers. Attention logits come from a
// shared scorer a . LeakyReLU(Theta [h_i || h_j || e_ij]) softmaxed over
// N_i u {i} with a zero-feature self-loop; aggregation sums alpha_ij * W h_j
// (neighbor form; the as-printed W h_i form is kept behind a flag). Two
// parameter-independent stacks run over the forward and transposed edge
// sets, and the final representation is h_rev || h_fwd || x through a linear
// head squashed by tanh into [-1, +1].

#include <string>
#include <vector>

#include "pugnn/autodiff.hpp"
#include "pugnn/behavior_encoder.hpp"
#include "pugnn/tensor.hpp"

namespace pugnn {

// Directed multigraph with per-edge features, node ids dense in [0, N).
struct GraphView {
  int num_nodes = 0;
  std::vector<int> src, dst;
  Mat edge_feat;  // E x F_e

  int num_edges() const { return static_cast<int>(src.size()); }

  void check() const {
    if (static_cast<int>(dst.size()) != num_edges() || edge_feat.rows != num_edges())
      throw std::invalid_argument("graph: edge arrays out of sync");
    for (int e = 0; e < num_edges(); ++e)
      if (src[e] < 0 || src[e] >= num_nodes || dst[e] < 0 || dst[e] >= num_nodes)
        throw std::invalid_argument("graph: dangling edge endpoint");
  }
};

// Edge arrays for one aggregation direction with self-loops appended:
// aggregator[e] collects from neighbor[e]. Self-loop edge features are zero.
struct DirectedEdges {
  std::vector<int> neighbor;    // j
  std::vector<int> aggregator;  // i
  Mat efeat;
};

inline DirectedEdges build_direction(const GraphView& g, bool reverse) {
  g.check();
  const int E = g.num_edges();
  DirectedEdges d;
  d.neighbor.reserve(E + g.num_nodes);
  d.aggregator.reserve(E + g.num_nodes);
  d.efeat = Mat(E + g.num_nodes, g.edge_feat.cols);
  for (int e = 0; e < E; ++e) {
    d.neighbor.push_back(reverse ? g.dst[e] : g.src[e]);
    d.aggregator.push_back(reverse ? g.src[e] : g.dst[e]);
    std::copy(g.edge_feat.row_ptr(e), g.edge_feat.row_ptr(e) + g.edge_feat.cols, d.efeat.row_ptr(e));
  }
  for (int i = 0; i < g.num_nodes; ++i) {
    d.neighbor.push_back(i);
    d.aggregator.push_back(i);
  }
  return d;
}

struct GatLayerParams {
  Mat theta_att;  // (2*F_in + F_e) x hidden
  Mat attn_a;     // hidden x 1
  Mat w_msg;      // F_in x F_out

  void init(int f_in, int f_e, int hidden, int f_out, Rng& rng) {
    int cat = 2 * f_in + f_e;
    theta_att = Mat::fan_in_init(cat, hidden, cat, rng);
    attn_a = Mat::fan_in_init(hidden, 1, hidden, rng);
    w_msg = Mat::fan_in_init(f_in, f_out, f_in, rng);
  }
};

struct GatStackParams {
  std::vector<GatLayerParams> layers;
  std::vector<BatchNormParams> norms;  // between consecutive layers
};

struct ModelConfig {
  int gnn_layers = 2;
  int gnn_hidden = 64;  // attention scorer width and per-layer output width
  int edge_feature_dim = 2;
  double dropout = 0.1;
  double leaky_slope = 0.2;
  bool batch_norm = true;
  bool aggregate_neighbor = true;  // false = as-printed W h_i aggregation
};

struct GatLayerVars {
  ad::Var theta_att, attn_a, w_msg;
};

struct GatStackVars {
  std::vector<GatLayerVars> layers;
  std::vector<BatchNormVars> norms;
};

inline GatStackParams make_gat_stack(const ModelConfig& cfg, int f_in, Rng& rng) {
  GatStackParams s;
  int in = f_in;
  for (int l = 0; l < cfg.gnn_layers; ++l) {
    GatLayerParams p;
    p.init(in, cfg.edge_feature_dim, cfg.gnn_hidden, cfg.gnn_hidden, rng);
    s.layers.push_back(std::move(p));
    in = cfg.gnn_hidden;
  }
  if (cfg.batch_norm)
    for (int l = 0; l + 1 < cfg.gnn_layers; ++l) {
      s.norms.emplace_back();
      s.norms.back().init(cfg.gnn_hidden);
    }
  return s;
}

inline GatStackVars bind_gat_stack(ad::Tape& tape, GatStackParams& p, ParamBindings& bindings) {
  GatStackVars v;
  for (auto& l : p.layers)
    v.layers.push_back(
        {bindings.bind(tape, l.theta_att), bindings.bind(tape, l.attn_a), bindings.bind(tape, l.w_msg)});
  for (auto& n : p.norms) v.norms.push_back(bind_batch_norm(tape, n, bindings));
  return v;
}

struct GatLayerOut {
  ad::Var h;      // N x F_out
  ad::Var alpha;  // (E + N) x 1 attention weights aligned with DirectedEdges
};

inline GatLayerOut gat_layer_forward(ad::Tape& tape, ad::Var h, const DirectedEdges& edges,
                                     const GatLayerVars& vars, const ModelConfig& cfg, int num_nodes) {
  ad::Var hi = tape.gather_rows(h, edges.aggregator);
  ad::Var hj = tape.gather_rows(h, edges.neighbor);
  ad::Var cat = tape.concat_cols({hi, hj, tape.leaf(edges.efeat)});
  ad::Var z = tape.leaky_relu(tape.matmul(cat, vars.theta_att), cfg.leaky_slope);
  ad::Var logits = tape.matmul(z, vars.attn_a);
  ad::Var alpha = tape.segment_softmax(logits, edges.aggregator, num_nodes);
  ad::Var msg = tape.matmul(cfg.aggregate_neighbor ? hj : hi, vars.w_msg);
  ad::Var out = tape.scatter_weighted_rows(msg, alpha, edges.aggregator, num_nodes);
  return {out, alpha};
}

inline ad::Var gat_stack_forward(ad::Tape& tape, ad::Var x, const DirectedEdges& edges,
                                 const GatStackVars& vars, const ModelConfig& cfg, int num_nodes,
                                 bool training, Rng& dropout_rng) {
  ad::Var h = x;
  for (size_t l = 0; l < vars.layers.size(); ++l) {
    h = gat_layer_forward(tape, h, edges, vars.layers[l], cfg, num_nodes).h;
    if (l + 1 < vars.layers.size()) {
      if (l < vars.norms.size()) {
        const auto& bn = vars.norms[l];
        h = tape.batch_norm(h, bn.gamma, bn.beta, {}, training, bn.state);
      }
      h = tape.dropout(h, cfg.dropout, training, dropout_rng);
    }
  }
  return h;
}

// Full fraud-scoring model on top of precomputed node features.
struct FraudModelParams {
  ModelConfig cfg;
  GatStackParams fwd, rev;
  Mat head_w;  // (2*gnn_hidden + F_x) x 1
  Mat head_b;  // 1 x 1

  void init(int f_x, Rng& rng) {
    fwd = make_gat_stack(cfg, f_x, rng);
    rev = make_gat_stack(cfg, f_x, rng);
    int rep = 2 * cfg.gnn_hidden + f_x;
    head_w = Mat::fan_in_init(rep, 1, rep, rng);
    head_b = Mat(1, 1, 0.0);
  }
};

struct FraudModelVars {
  GatStackVars fwd, rev;
  ad::Var head_w, head_b;
};

inline FraudModelVars bind_fraud_model(ad::Tape& tape, FraudModelParams& p, ParamBindings& bindings) {
  return {bind_gat_stack(tape, p.fwd, bindings), bind_gat_stack(tape, p.rev, bindings),
          bindings.bind(tape, p.head_w), bindings.bind(tape, p.head_b)};
}

struct ModelForwardOut {
  ad::Var raw_score;       // t, N x 1, fed to the surrogate losses
  ad::Var yhat;            // tanh(t) in [-1, +1]
  ad::Var representation;  // h_rev || h_fwd || x, pre-head
  ad::Var graph_repr;      // h_rev || h_fwd
};

// Runs both directional stacks and the head. x must have width F_x matching
// the stacks' input width.
inline ModelForwardOut model_forward(ad::Tape& tape, const FraudModelVars& vars, const ModelConfig& cfg,
                                     const GraphView& graph, ad::Var x, bool training,
                                     Rng& dropout_rng) {
  const Mat& xv = tape.val(x);
  if (xv.rows != graph.num_nodes)
    throw std::invalid_argument("model_forward: feature rows do not match node count");
  int expected = tape.val(vars.fwd.layers[0].theta_att).rows;
  if (2 * xv.cols + cfg.edge_feature_dim != expected)
    throw std::invalid_argument("model_forward: encoder width F_x=" + std::to_string(xv.cols) +
                                " incompatible with layer input width");
  DirectedEdges fwd_edges = build_direction(graph, /*reverse=*/false);
  DirectedEdges rev_edges = build_direction(graph, /*reverse=*/true);
  ad::Var h_fwd = gat_stack_forward(tape, x, fwd_edges, vars.fwd, cfg, graph.num_nodes, training, dropout_rng);
  ad::Var h_rev = gat_stack_forward(tape, x, rev_edges, vars.rev, cfg, graph.num_nodes, training, dropout_rng);
  ModelForwardOut out;
  out.graph_repr = tape.concat_cols({h_rev, h_fwd});
  out.representation = tape.concat_cols({h_rev, h_fwd, x});
  out.raw_score = tape.add_bias(tape.matmul(out.representation, vars.head_w), vars.head_b);
  out.yhat = tape.tanh_act(out.raw_score);
  return out;
}

// ---- single-node attention weights (spec-level operation) ----------------

// Attention weights for node i over its neighborhood plus the self-loop.
// Returns weights aligned with [self, neighbors...]. features holds one row
// per node referenced; edge_features one row per neighbor edge.
inline std::vector<double> attention_coefficients(int node_i, const std::vector<int>& neighbors,
                                                  const Mat& features, const Mat& edge_features,
                                                  const GatLayerParams& params,
                                                  double leaky_slope = 0.2) {
  if (static_cast<int>(neighbors.size()) != edge_features.rows)
    throw std::invalid_argument("attention_coefficients: one edge feature row per neighbor required");
  const int f = features.cols;
  const int fe = edge_features.cols;
  if (params.theta_att.rows != 2 * f + fe)
    throw std::invalid_argument("attention_coefficients: width mismatch");

  auto logit = [&](int j, const double* efeat) {
    std::vector<double> cat(2 * f + fe);
    std::copy(features.row_ptr(node_i), features.row_ptr(node_i) + f, cat.begin());
    std::copy(features.row_ptr(j), features.row_ptr(j) + f, cat.begin() + f);
    std::copy(efeat, efeat + fe, cat.begin() + 2 * f);
    double s = 0.0;
    for (int w = 0; w < params.theta_att.cols; ++w) {
      double z = 0.0;
      for (int c = 0; c < 2 * f + fe; ++c) z += cat[c] * params.theta_att(c, w);
      z = z > 0.0 ? z : leaky_slope * z;
      s += z * params.attn_a(w, 0);
    }
    return s;
  };

  std::vector<double> zero_feat(fe, 0.0);
  std::vector<double> logits;
  logits.push_back(logit(node_i, zero_feat.data()));  // self-loop, e_ii = 0
  for (size_t k = 0; k < neighbors.size(); ++k)
    logits.push_back(logit(neighbors[k], edge_features.row_ptr(static_cast<int>(k))));

  double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    denom += l;
  }
  for (double& l : logits) l /= denom;
  return logits;
}

// One attention layer evaluated on plain matrices (forward edge direction,
// evaluation semantics). Used by tests and by the spec-level contract.
inline Mat layer_forward(const GraphView& graph, const Mat& h_prev, GatLayerParams& params,
                         const ModelConfig& cfg) {
  ad::Tape tape;
  ParamBindings bindings;
  GatLayerVars vars{bindings.bind(tape, params.theta_att), bindings.bind(tape, params.attn_a),
                    bindings.bind(tape, params.w_msg)};
  DirectedEdges edges = build_direction(graph, false);
  GatLayerOut out = gat_layer_forward(tape, tape.leaf(h_prev), edges, vars, cfg, graph.num_nodes);
  return tape.val(out.h);
}

}  // namespace pugnn
