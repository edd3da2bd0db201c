#pragma once

// End-to-end training: behavior encoding, train-time GraphSMOTE
// augmentation, bidirectional graph attention, PU (or ablation) loss, Adam
// steps, early stopping on validation F1 and seeded multi-run aggregation.
// Training runs on the subgraph induced by the train split (inductive
// protocol); validation adds the validation nodes, test runs the full graph.

#include <atomic>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pugnn/behavior_encoder.hpp"
#include "pugnn/dataset.hpp"
#include "pugnn/graph_layers.hpp"
#include "pugnn/metrics.hpp"
#include "pugnn/oversampling.hpp"
#include "pugnn/pu_loss.hpp"

namespace pugnn {

enum class LossMode { kNnpu, kUpu, kCe };

inline const char* loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::kNnpu: return "nnpu";
    case LossMode::kUpu: return "upu";
    case LossMode::kCe: return "ce";
  }
  return "?";
}

inline LossMode loss_mode_from_name(const std::string& s) {
  if (s == "nnpu") return LossMode::kNnpu;
  if (s == "upu") return LossMode::kUpu;
  if (s == "ce") return LossMode::kCe;
  throw std::invalid_argument("unknown loss_mode: " + s);
}

struct TrainConfig {
  int embed_dim = 64;  // d; F_x = 2d by construction
  int attention_blocks = 5;
  int gnn_layers = 2;
  int gnn_hidden = 64;
  double dropout = 0.1;
  double learning_rate = 0.005;
  int max_epochs = 200;
  int patience = 10;
  int num_runs = 5;
  LossMode loss_mode = LossMode::kNnpu;
  bool smote_enabled = true;
  int smote_k = 5;
  double smote_target_ratio = 0.5;
  double link_threshold = 0.5;
  int link_max_degree = 5;
  int link_epochs = 40;
  double pi_p_override = -1.0;  // < 0 means "use the dataset prior"
  uint64_t seed = 1;
  bool qkv_projections = true;
  bool batch_norm = true;
  bool aggregate_neighbor = true;
  NnpuCorrectionMode nnpu_correction = NnpuCorrectionMode::kPriorWeighted;
  NnpuGradientMode nnpu_gradient = NnpuGradientMode::kClamp;

  int feature_dim() const { return 2 * embed_dim; }

  void validate() const {
    if (embed_dim < 1 || attention_blocks < 1 || gnn_layers < 1 || gnn_hidden < 1)
      throw std::invalid_argument("train config: model dimensions must be >= 1");
    if (patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
    if (num_runs < 1) throw std::invalid_argument("train config: num_runs must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning_rate must be > 0");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("train config: dropout must lie in [0,1)");
    if (!(link_threshold > 0.0 && link_threshold <= 1.0))
      throw std::invalid_argument("train config: link_threshold must lie in (0,1]");
    if (pi_p_override >= 0.0 && !(pi_p_override > 0.0 && pi_p_override < 1.0))
      throw std::invalid_argument("train config: pi_p_override must lie in (0,1)");
  }
};

// ---- optimizer -----------------------------------------------------------

struct AdamState {
  Mat m, v;
};

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one step over the bound parameters using the tape's gradients.
  // State slots are keyed by binding order, which is identical every epoch.
  void step(ad::Tape& tape, ParamBindings& bindings) {
    ++t_;
    if (state_.empty()) {
      for (auto& [var, master] : bindings.entries)
        state_.push_back({Mat(master->rows, master->cols), Mat(master->rows, master->cols)});
    }
    if (state_.size() != bindings.entries.size())
      throw std::logic_error("adam: binding count changed between steps");
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t k = 0; k < bindings.entries.size(); ++k) {
      auto& [var, master] = bindings.entries[k];
      Mat& g = tape.grad(var);
      if (g.empty()) continue;  // parameter unused this step
      AdamState& st = state_[k];
      for (size_t i = 0; i < master->a.size(); ++i) {
        st.m.a[i] = beta1_ * st.m.a[i] + (1.0 - beta1_) * g.a[i];
        st.v.a[i] = beta2_ * st.v.a[i] + (1.0 - beta2_) * g.a[i] * g.a[i];
        master->a[i] -= lr_ * (st.m.a[i] / bc1) / (std::sqrt(st.v.a[i] / bc2) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<AdamState> state_;
};

// ---- early stopping -------------------------------------------------------

// Stops after `patience` consecutive updates without improvement; tracks the
// best value and its index.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  }

  bool update(double value) {
    ++count_;
    if (value > best_value_) {
      best_value_ = value;
      best_index_ = count_;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  int best_index() const { return best_index_; }
  double best_value() const { return best_value_; }

 private:
  int patience_;
  int count_ = 0;
  int stale_ = 0;
  int best_index_ = 0;
  double best_value_ = -std::numeric_limits<double>::infinity();
};

// ---- model bundle ---------------------------------------------------------

struct PuGnnModel {
  EncoderParams encoder;
  FraudModelParams graph_model;
  LinkGeneratorParams link_gen;

  void init(const TrainConfig& cfg, int vocab_size, int edge_feature_dim, Rng& rng) {
    encoder.cfg.vocab_size = vocab_size;
    encoder.cfg.d = cfg.embed_dim;
    encoder.cfg.blocks = cfg.attention_blocks;
    encoder.cfg.qkv_projections = cfg.qkv_projections;
    encoder.cfg.dropout = cfg.dropout;
    encoder.cfg.batch_norm = cfg.batch_norm;
    encoder.init(rng);
    graph_model.cfg.gnn_layers = cfg.gnn_layers;
    graph_model.cfg.gnn_hidden = cfg.gnn_hidden;
    graph_model.cfg.edge_feature_dim = edge_feature_dim;
    graph_model.cfg.dropout = cfg.dropout;
    graph_model.cfg.batch_norm = cfg.batch_norm;
    graph_model.cfg.aggregate_neighbor = cfg.aggregate_neighbor;
    graph_model.init(cfg.feature_dim(), rng);
    link_gen.init(cfg.feature_dim());
    link_gen.threshold = cfg.link_threshold;
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainedModel {
  PuGnnModel model;
  TrainConfig config;
  double pi_p = 0.0;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
};

// ---- dataset views ---------------------------------------------------------

// Induced subgraph over the players of the given splits, ids remapped to a
// dense local range ordered by player id.
struct ScopedGraph {
  GraphView graph;
  std::vector<int> node_ids;       // local -> player id
  std::vector<int> local_of;       // player id -> local or -1
  SequenceBatch batch;
};

inline ScopedGraph build_scope(const Dataset& ds, std::initializer_list<Split> splits) {
  ScopedGraph s;
  s.local_of.assign(ds.num_players(), -1);
  for (int pid = 0; pid < ds.num_players(); ++pid) {
    for (Split sp : splits)
      if (ds.split_assignment[pid] == sp) {
        s.local_of[pid] = static_cast<int>(s.node_ids.size());
        s.node_ids.push_back(pid);
        break;
      }
  }
  s.graph.num_nodes = static_cast<int>(s.node_ids.size());
  std::vector<std::vector<double>> feats;
  for (const auto& e : ds.edges) {
    int ls = s.local_of[e.src], ld = s.local_of[e.dst];
    if (ls < 0 || ld < 0) continue;
    s.graph.src.push_back(ls);
    s.graph.dst.push_back(ld);
    feats.push_back(e.features);
  }
  s.graph.edge_feat = Mat(static_cast<int>(feats.size()), ds.generator_config.edge_feature_dim);
  for (size_t e = 0; e < feats.size(); ++e)
    std::copy(feats[e].begin(), feats[e].end(), s.graph.edge_feat.row_ptr(static_cast<int>(e)));

  std::vector<std::vector<int>> seqs;
  seqs.reserve(s.node_ids.size());
  for (int pid : s.node_ids) seqs.push_back(ds.players[pid].activity_sequence);
  s.batch = make_sequence_batch(seqs);
  return s;
}

// Evaluation-mode scores (yhat in [-1,1]) for every node of the scope.
inline std::vector<double> score_scope(PuGnnModel& model, const ScopedGraph& scope) {
  ad::Tape tape;
  ParamBindings bindings;
  EncoderVars enc = bind_encoder(tape, model.encoder, bindings);
  FraudModelVars gm = bind_fraud_model(tape, model.graph_model, bindings);
  Rng unused(0);
  ad::Var x = encoder_forward(tape, enc, model.encoder.cfg, scope.batch, /*training=*/false, unused);
  ModelForwardOut out =
      model_forward(tape, gm, model.graph_model.cfg, scope.graph, x, /*training=*/false, unused);
  return tape.val(out.yhat).a;
}

// Metrics on the players of `target`, scored inside the given scope.
inline MetricsReport evaluate_split(PuGnnModel& model, const Dataset& ds, Split target,
                                    std::initializer_list<Split> scope_splits) {
  ScopedGraph scope = build_scope(ds, scope_splits);
  std::vector<double> yhat = score_scope(model, scope);
  std::vector<double> scores;
  std::vector<int> labels;
  for (size_t l = 0; l < scope.node_ids.size(); ++l) {
    int pid = scope.node_ids[l];
    if (ds.split_assignment[pid] != target) continue;
    scores.push_back(yhat[l]);
    labels.push_back(ds.players[pid].true_label);
  }
  return compute_metrics(scores, labels);
}

inline MetricsReport evaluate_validation(PuGnnModel& model, const Dataset& ds) {
  return evaluate_split(model, ds, Split::kValidation, {Split::kTrain, Split::kValidation});
}

inline MetricsReport evaluate_test(PuGnnModel& model, const Dataset& ds) {
  return evaluate_split(model, ds, Split::kTest, {Split::kTrain, Split::kValidation, Split::kTest});
}

// ---- training loop ---------------------------------------------------------

inline TrainedModel train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();

  double pi_p = config.pi_p_override > 0.0 ? config.pi_p_override : dataset.pi_p;
  if (!(pi_p > 0.0 && pi_p < 1.0))
    throw std::runtime_error("train: class prior pi_p unavailable; dataset metadata missing and no override");
  ClassPrior prior(pi_p);

  ScopedGraph train_scope = build_scope(dataset, {Split::kTrain});
  if (train_scope.node_ids.empty()) throw std::runtime_error("train: empty train split");

  // local label views
  std::vector<int> pos_local, unl_local;
  std::vector<int> smote_labels(train_scope.node_ids.size(), 0);
  for (size_t l = 0; l < train_scope.node_ids.size(); ++l) {
    auto it = dataset.train_label.find(train_scope.node_ids[l]);
    if (it == dataset.train_label.end()) throw std::runtime_error("train: missing train label");
    if (it->second == 1) {
      pos_local.push_back(static_cast<int>(l));
      smote_labels[l] = 1;
    } else {
      unl_local.push_back(static_cast<int>(l));
    }
  }
  if (pos_local.empty()) throw std::runtime_error("train: no labeled positives in train split");
  if (unl_local.empty()) throw std::runtime_error("train: no unlabeled players in train split");

  Rng init_rng = Rng::substream(config.seed, 0x1717);
  Rng dropout_rng = Rng::substream(config.seed, 0xD40);
  Rng smote_rng = Rng::substream(config.seed, 0x50E);
  Rng link_rng = Rng::substream(config.seed, 0x117);

  TrainedModel result;
  result.config = config;
  result.pi_p = pi_p;
  result.model.init(config, dataset.generator_config.vocab_size,
                    dataset.generator_config.edge_feature_dim, init_rng);
  PuGnnModel& model = result.model;

  // Link generator fitted once on the initial behavior embeddings and kept
  // fixed; per-epoch wiring scores use the current embeddings.
  if (config.smote_enabled && train_scope.graph.num_edges() > 0) {
    ad::Tape tape;
    ParamBindings bindings;
    EncoderVars enc = bind_encoder(tape, model.encoder, bindings);
    Rng unused(0);
    ad::Var x = encoder_forward(tape, enc, model.encoder.cfg, train_scope.batch, false, unused);
    model.link_gen = train_link_generator(train_scope.graph, tape.val(x), model.link_gen,
                                          config.link_epochs, link_rng);
  }

  Adam optimizer(config.learning_rate);
  EarlyStopper stopper(config.patience);
  PuGnnModel best = model;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    ad::Tape tape;
    ParamBindings bindings;
    EncoderVars enc = bind_encoder(tape, model.encoder, bindings);
    FraudModelVars gm = bind_fraud_model(tape, model.graph_model, bindings);

    ad::Var x = encoder_forward(tape, enc, model.encoder.cfg, train_scope.batch, true, dropout_rng);

    ad::Var node_features = x;
    const GraphView* forward_graph = &train_scope.graph;
    AugmentedGraph augmented;
    std::vector<int> pos_rows = pos_local;
    if (config.smote_enabled) {
      Mat xv = tape.val(x);  // copy: later tape ops must not invalidate it
      std::vector<SyntheticNode> synthetic =
          smote_nodes(xv, smote_labels, config.smote_target_ratio, config.smote_k, smote_rng);
      if (!synthetic.empty()) {
        std::vector<int> pa, pb;
        std::vector<double> wa, wb;
        for (const auto& s : synthetic) {
          pa.push_back(s.parent_a);
          pb.push_back(s.parent_b);
          wa.push_back(1.0 - s.lambda);
          wb.push_back(s.lambda);
        }
        // differentiable interpolation: gradients flow to both parents
        ad::Var syn = tape.add(tape.row_scale(tape.gather_rows(x, pa), wa),
                               tape.row_scale(tape.gather_rows(x, pb), wb));
        node_features = tape.vstack(x, syn);
        augmented = wire_synthetic_nodes(train_scope.graph, xv, synthetic, model.link_gen,
                                         config.link_max_degree);
        forward_graph = &augmented.graph;
        for (size_t s = 0; s < synthetic.size(); ++s)
          pos_rows.push_back(train_scope.graph.num_nodes + static_cast<int>(s));
      }
    }

    ModelForwardOut out = model_forward(tape, gm, model.graph_model.cfg, *forward_graph,
                                        node_features, true, dropout_rng);

    ad::Var objective;
    double loss_value = 0.0;
    if (config.loss_mode == LossMode::kCe) {
      std::vector<int> rows = pos_rows;
      std::vector<int> labels01(pos_rows.size(), 1);
      rows.insert(rows.end(), unl_local.begin(), unl_local.end());
      labels01.insert(labels01.end(), unl_local.size(), 0);  // unlabeled treated as negative
      objective = tape.mean_bce_loss(tape.gather_rows(out.raw_score, rows), labels01);
      loss_value = tape.scalar(objective);
    } else {
      ad::Var scores_p = tape.gather_rows(out.raw_score, pos_rows);
      ad::Var scores_u = tape.gather_rows(out.raw_score, unl_local);
      PuLossVars lv = config.loss_mode == LossMode::kUpu
                          ? upu_objective(tape, scores_p, scores_u, prior)
                          : nnpu_objective(tape, scores_p, scores_u, prior, config.nnpu_correction,
                                           config.nnpu_gradient);
      objective = lv.objective;
      loss_value = config.loss_mode == LossMode::kUpu ? lv.risks.upu : lv.risks.nnpu;
    }
    if (!std::isfinite(loss_value))
      throw std::runtime_error("train: loss diverged (not finite) at epoch " + std::to_string(epoch));

    tape.backward(objective);
    optimizer.step(tape, bindings);
    for (int j = 0; j < model.encoder.cfg.d; ++j) model.encoder.embedding(0, j) = 0.0;  // pad row pinned

    double val_f1 = evaluate_validation(model, dataset).f1;
    result.history.push_back({epoch, loss_value, val_f1});
    if (stopper.update(val_f1)) {
      best = model;
      best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }

  result.model = best;
  result.best_epoch = best_epoch;
  result.best_val_f1 = stopper.best_value();
  return result;
}

// ---- repeated runs ----------------------------------------------------------

struct RepeatedRuns {
  MetricsAggregate test_metrics;
  std::vector<TrainedModel> models;  // per run, seeds seed+0 .. seed+num_runs-1
};

// Runs train() with consecutive seeds, in parallel when hardware allows.
// Runs are fully independent, so parallel and serial execution agree.
inline RepeatedRuns run_repeated(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  const int R = config.num_runs;
  std::vector<TrainedModel> models(R);
  std::vector<MetricsReport> reports(R);
  std::vector<std::exception_ptr> errors(R);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int r = next.fetch_add(1);
      if (r >= R) return;
      try {
        TrainConfig run_cfg = config;
        run_cfg.seed = config.seed + static_cast<uint64_t>(r);
        run_cfg.num_runs = 1;
        models[r] = train(dataset, run_cfg);
        reports[r] = evaluate_test(models[r].model, dataset);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  int n_threads = std::max(1, std::min<int>(R, hw == 0 ? 1 : static_cast<int>(hw)));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  RepeatedRuns out;
  out.test_metrics = aggregate_metrics(std::move(reports));
  out.models = std::move(models);
  return out;
}

}  // namespace pugnn
