#pragma once

// Reference baselines from the evaluation protocol: a three-layer MLP on
// behavior histogram features and a mean-aggregation GNN that swaps the
// attention for an unweighted neighborhood mean. Both train with
// cross-entropy (unlabeled treated as negative) like every non-PU run.

#include <vector>

#include "pugnn/metrics.hpp"
#include "pugnn/training.hpp"

namespace pugnn {

// Normalized event-type histogram of a player's non-pad activity log.
inline Mat histogram_features(const Dataset& ds, const std::vector<int>& player_ids) {
  const int vocab = ds.generator_config.vocab_size;
  Mat out(static_cast<int>(player_ids.size()), vocab);
  for (size_t r = 0; r < player_ids.size(); ++r) {
    double total = 0.0;
    double* row = out.row_ptr(static_cast<int>(r));
    for (int ev : ds.players[player_ids[r]].activity_sequence)
      if (ev != 0) {
        row[ev] += 1.0;
        total += 1.0;
      }
    if (total > 0.0)
      for (int c = 0; c < vocab; ++c) row[c] /= total;
  }
  return out;
}

namespace baseline_detail {

struct MlpParams {
  Mat w1, b1, w2, b2, w3, b3;
  BatchNormParams bn1, bn2;

  void init(int in, int hidden, Rng& rng) {
    w1 = Mat::fan_in_init(in, hidden, in, rng);
    b1 = Mat(1, hidden, 0.0);
    w2 = Mat::fan_in_init(hidden, hidden, hidden, rng);
    b2 = Mat(1, hidden, 0.0);
    w3 = Mat::fan_in_init(hidden, 1, hidden, rng);
    b3 = Mat(1, 1, 0.0);
    bn1.init(hidden);
    bn2.init(hidden);
  }
};

struct BaselineData {
  ScopedGraph train_scope, val_scope, full_scope;
  Mat train_x, val_x, full_x;
  std::vector<int> train_rows_pos01;  // CE labels aligned with train locals
  std::vector<int> val_rows, test_rows;
  std::vector<int> val_labels, test_labels;
};

inline BaselineData prepare(const Dataset& ds) {
  BaselineData d;
  d.train_scope = build_scope(ds, {Split::kTrain});
  d.val_scope = build_scope(ds, {Split::kTrain, Split::kValidation});
  d.full_scope = build_scope(ds, {Split::kTrain, Split::kValidation, Split::kTest});
  d.train_x = histogram_features(ds, d.train_scope.node_ids);
  d.val_x = histogram_features(ds, d.val_scope.node_ids);
  d.full_x = histogram_features(ds, d.full_scope.node_ids);
  for (int pid : d.train_scope.node_ids) d.train_rows_pos01.push_back(ds.train_label.at(pid) == 1);
  for (size_t l = 0; l < d.val_scope.node_ids.size(); ++l) {
    int pid = d.val_scope.node_ids[l];
    if (ds.split_assignment[pid] == Split::kValidation) {
      d.val_rows.push_back(static_cast<int>(l));
      d.val_labels.push_back(ds.players[pid].true_label);
    }
  }
  for (size_t l = 0; l < d.full_scope.node_ids.size(); ++l) {
    int pid = d.full_scope.node_ids[l];
    if (ds.split_assignment[pid] == Split::kTest) {
      d.test_rows.push_back(static_cast<int>(l));
      d.test_labels.push_back(ds.players[pid].true_label);
    }
  }
  return d;
}

// Undirected neighbor pairs (both transfer directions), no self-loops.
struct NeighborLists {
  std::vector<int> from, to;  // mean over `from` rows lands on `to`
};

inline NeighborLists undirected_neighbors(const GraphView& g) {
  NeighborLists n;
  for (int e = 0; e < g.num_edges(); ++e) {
    n.from.push_back(g.src[e]);
    n.to.push_back(g.dst[e]);
    n.from.push_back(g.dst[e]);
    n.to.push_back(g.src[e]);
  }
  return n;
}

// Unweighted mean of the neighbors' states; isolated nodes get the zero
// vector. The caller concatenates the node's own state alongside.
inline ad::Var mean_aggregate(ad::Tape& tape, ad::Var h, const NeighborLists& nbr, int num_nodes) {
  std::vector<int> deg(num_nodes, 0);
  for (int i : nbr.to) ++deg[i];
  std::vector<double> w(nbr.to.size());
  for (size_t e = 0; e < w.size(); ++e) w[e] = 1.0 / deg[nbr.to[e]];
  Mat wm(static_cast<int>(w.size()), 1);
  wm.a = w;
  ad::Var msg = tape.gather_rows(h, nbr.from);
  return tape.scatter_weighted_rows(msg, tape.leaf(wm), nbr.to, num_nodes);
}

}  // namespace baseline_detail

// Three-layer MLP on histogram features; graph structure unused.
inline MetricsReport baseline_mlp(const Dataset& dataset, const TrainConfig& config) {
  dataset.validate();
  baseline_detail::BaselineData data = baseline_detail::prepare(dataset);
  baseline_detail::MlpParams params;
  Rng init_rng = Rng::substream(config.seed, 0x3317);
  params.init(dataset.generator_config.vocab_size, config.gnn_hidden, init_rng);

  auto forward = [&](ad::Tape& tape, ParamBindings& b, const Mat& x, bool training) {
    ad::Var h = tape.leaf(x);
    h = tape.add_bias(tape.matmul(h, b.bind(tape, params.w1)), b.bind(tape, params.b1));
    if (config.batch_norm)
      h = tape.batch_norm(h, b.bind(tape, params.bn1.gamma), b.bind(tape, params.bn1.beta), {},
                          training, &params.bn1.state);
    h = tape.relu(h);
    h = tape.add_bias(tape.matmul(h, b.bind(tape, params.w2)), b.bind(tape, params.b2));
    if (config.batch_norm)
      h = tape.batch_norm(h, b.bind(tape, params.bn2.gamma), b.bind(tape, params.bn2.beta), {},
                          training, &params.bn2.state);
    h = tape.relu(h);
    return tape.add_bias(tape.matmul(h, b.bind(tape, params.w3)), b.bind(tape, params.b3));
  };
  auto scores_of = [&](const Mat& x) {
    ad::Tape tape;
    ParamBindings b;
    return tape.val(forward(tape, b, x, false)).a;
  };

  Adam optimizer(config.learning_rate);
  EarlyStopper stopper(config.patience);
  baseline_detail::MlpParams best = params;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    ad::Tape tape;
    ParamBindings b;
    ad::Var t = forward(tape, b, data.train_x, true);
    ad::Var loss = tape.mean_bce_loss(t, data.train_rows_pos01);
    if (!std::isfinite(tape.scalar(loss)))
      throw std::runtime_error("baseline_mlp: loss diverged at epoch " + std::to_string(epoch));
    tape.backward(loss);
    optimizer.step(tape, b);

    std::vector<double> val_scores_all = scores_of(data.val_x);
    std::vector<double> vs;
    for (int r : data.val_rows) vs.push_back(val_scores_all[r]);
    if (stopper.update(compute_metrics(vs, data.val_labels).f1)) best = params;
    if (stopper.should_stop()) break;
  }

  params = best;
  std::vector<double> full = scores_of(data.full_x);
  std::vector<double> ts;
  for (int r : data.test_rows) ts.push_back(full[r]);
  return compute_metrics(ts, data.test_labels);
}

// Two mean-aggregation layers on histogram features, linear head.
inline MetricsReport baseline_mean_gnn(const Dataset& dataset, const TrainConfig& config) {
  dataset.validate();
  baseline_detail::BaselineData data = baseline_detail::prepare(dataset);
  const int vocab = dataset.generator_config.vocab_size;
  const int hidden = config.gnn_hidden;

  struct Params {
    Mat w1, b1, w2, b2, head_w, head_b;
    BatchNormParams bn1, bn2;
  } params;
  Rng init_rng = Rng::substream(config.seed, 0x6617);
  params.w1 = Mat::fan_in_init(2 * vocab, hidden, 2 * vocab, init_rng);
  params.b1 = Mat(1, hidden, 0.0);
  params.w2 = Mat::fan_in_init(2 * hidden, hidden, 2 * hidden, init_rng);
  params.b2 = Mat(1, hidden, 0.0);
  params.head_w = Mat::fan_in_init(hidden, 1, hidden, init_rng);
  params.head_b = Mat(1, 1, 0.0);
  params.bn1.init(hidden);
  params.bn2.init(hidden);

  // layer: h' = ReLU(BN(W [h || mean_{j in N(i)} h_j] + b))
  auto forward = [&](ad::Tape& tape, ParamBindings& b, const Mat& x, const ScopedGraph& scope,
                     bool training) {
    baseline_detail::NeighborLists nbr = baseline_detail::undirected_neighbors(scope.graph);
    ad::Var h = tape.leaf(x);
    ad::Var agg = baseline_detail::mean_aggregate(tape, h, nbr, scope.graph.num_nodes);
    h = tape.add_bias(tape.matmul(tape.concat_cols({h, agg}), b.bind(tape, params.w1)),
                      b.bind(tape, params.b1));
    if (config.batch_norm)
      h = tape.batch_norm(h, b.bind(tape, params.bn1.gamma), b.bind(tape, params.bn1.beta), {},
                          training, &params.bn1.state);
    h = tape.relu(h);
    agg = baseline_detail::mean_aggregate(tape, h, nbr, scope.graph.num_nodes);
    h = tape.add_bias(tape.matmul(tape.concat_cols({h, agg}), b.bind(tape, params.w2)),
                      b.bind(tape, params.b2));
    if (config.batch_norm)
      h = tape.batch_norm(h, b.bind(tape, params.bn2.gamma), b.bind(tape, params.bn2.beta), {},
                          training, &params.bn2.state);
    h = tape.relu(h);
    return tape.add_bias(tape.matmul(h, b.bind(tape, params.head_w)), b.bind(tape, params.head_b));
  };
  auto scores_of = [&](const Mat& x, const ScopedGraph& scope) {
    ad::Tape tape;
    ParamBindings b;
    return tape.val(forward(tape, b, x, scope, false)).a;
  };

  Adam optimizer(config.learning_rate);
  EarlyStopper stopper(config.patience);
  Params best = params;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    ad::Tape tape;
    ParamBindings b;
    ad::Var t = forward(tape, b, data.train_x, data.train_scope, true);
    ad::Var loss = tape.mean_bce_loss(t, data.train_rows_pos01);
    if (!std::isfinite(tape.scalar(loss)))
      throw std::runtime_error("baseline_mean_gnn: loss diverged at epoch " + std::to_string(epoch));
    tape.backward(loss);
    optimizer.step(tape, b);

    std::vector<double> val_scores_all = scores_of(data.val_x, data.val_scope);
    std::vector<double> vs;
    for (int r : data.val_rows) vs.push_back(val_scores_all[r]);
    if (stopper.update(compute_metrics(vs, data.val_labels).f1)) best = params;
    if (stopper.should_stop()) break;
  }

  params = best;
  std::vector<double> full = scores_of(data.full_x, data.full_scope);
  std::vector<double> ts;
  for (int r : data.test_rows) ts.push_back(full[r]);
  return compute_metrics(ts, data.test_labels);
}

}  // namespace pugnn
