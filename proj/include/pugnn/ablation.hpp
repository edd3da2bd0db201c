#pragma once

// Ablation grid over {full, w/o SMOTE, w/o PU, w/o both} and the export of
// intermediate embeddings for external projection tools.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pugnn/plot.hpp"
#include "pugnn/training.hpp"

namespace pugnn {

enum class AblationVariant { kFull, kWoSmote, kWoPu, kWoBoth };

inline const char* ablation_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::kFull: return "full";
    case AblationVariant::kWoSmote: return "wo_smote";
    case AblationVariant::kWoPu: return "wo_pu";
    case AblationVariant::kWoBoth: return "wo_both";
  }
  return "?";
}

// Config overrides per variant: w/o PU swaps the loss for cross-entropy,
// w/o SMOTE disables the oversampling; nothing else changes.
inline TrainConfig resolve_ablation(const TrainConfig& base, AblationVariant v) {
  TrainConfig cfg = base;
  if (v == AblationVariant::kWoPu || v == AblationVariant::kWoBoth) cfg.loss_mode = LossMode::kCe;
  if (v == AblationVariant::kWoSmote || v == AblationVariant::kWoBoth) cfg.smote_enabled = false;
  return cfg;
}

struct AblationRow {
  AblationVariant variant;
  TrainConfig resolved;
  MetricsAggregate metrics;
};

// Runs all four variants with the base config's num_runs seeds each. When
// out_dir is nonempty, writes ablation.csv and ablation.png there.
inline std::vector<AblationRow> run_ablation_grid(const Dataset& dataset, const TrainConfig& base,
                                                  const std::string& out_dir = "") {
  std::vector<AblationRow> rows;
  for (AblationVariant v : {AblationVariant::kFull, AblationVariant::kWoSmote, AblationVariant::kWoPu,
                            AblationVariant::kWoBoth}) {
    AblationRow row;
    row.variant = v;
    row.resolved = resolve_ablation(base, v);
    row.metrics = run_repeated(dataset, row.resolved).test_metrics;
    rows.push_back(std::move(row));
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream csv(out_dir + "/ablation.csv");
      csv << "variant,f1_mean,f1_std,auc_mean,auc_std,tpr_mean,tpr_std,tnr_mean,tnr_std,runs\n";
      for (const auto& r : rows) {
        const auto& m = r.metrics;
        csv << ablation_name(r.variant) << ',' << m.f1_mean << ',' << m.f1_std << ',' << m.auc_mean
            << ',' << m.auc_std << ',' << m.tpr_mean << ',' << m.tpr_std << ',' << m.tnr_mean << ','
            << m.tnr_std << ',' << m.runs.size() << '\n';
      }
    }
    std::vector<std::vector<double>> values;
    std::vector<std::string> series = {"FULL", "W/O SMOTE", "W/O PU", "W/O BOTH"};
    for (const auto& r : rows)
      values.push_back({r.metrics.f1_mean, r.metrics.auc_mean, r.metrics.tpr_mean, r.metrics.tnr_mean});
    save_grouped_bar_png(out_dir + "/ablation.png", {"F1", "AUC", "TPR", "TNR"}, series, values);
  }
  return rows;
}

enum class EmbeddingStage { kBehavior, kGraph, kBoth };

inline EmbeddingStage embedding_stage_from_name(const std::string& s) {
  if (s == "behavior") return EmbeddingStage::kBehavior;
  if (s == "graph") return EmbeddingStage::kGraph;
  if (s == "both") return EmbeddingStage::kBoth;
  throw std::invalid_argument("unknown embedding stage: " + s);
}

struct EmbeddingExport {
  Mat embeddings;               // one row per requested player
  std::vector<int> player_ids;
  std::vector<int> labels;      // ground-truth +1 / -1
};

// Stage-appropriate node embeddings for projection: the behavior vector x_i,
// the graph-only representation, or their concatenation. Runs the full graph
// in evaluation mode. player_ids empty means every player.
inline EmbeddingExport export_embeddings_for_projection(PuGnnModel& model, const Dataset& dataset,
                                                        EmbeddingStage stage,
                                                        std::vector<int> player_ids = {}) {
  ScopedGraph scope = build_scope(dataset, {Split::kTrain, Split::kValidation, Split::kTest});
  ad::Tape tape;
  ParamBindings bindings;
  EncoderVars enc = bind_encoder(tape, model.encoder, bindings);
  FraudModelVars gm = bind_fraud_model(tape, model.graph_model, bindings);
  Rng unused(0);
  ad::Var x = encoder_forward(tape, enc, model.encoder.cfg, scope.batch, false, unused);
  ModelForwardOut out =
      model_forward(tape, gm, model.graph_model.cfg, scope.graph, x, false, unused);
  const Mat& src = stage == EmbeddingStage::kBehavior ? tape.val(x)
                   : stage == EmbeddingStage::kGraph  ? tape.val(out.graph_repr)
                                                      : tape.val(out.representation);

  if (player_ids.empty()) player_ids = scope.node_ids;
  EmbeddingExport ex;
  ex.player_ids = player_ids;
  ex.embeddings = Mat(static_cast<int>(player_ids.size()), src.cols);
  for (size_t r = 0; r < player_ids.size(); ++r) {
    int local = scope.local_of[player_ids[r]];
    if (local < 0) throw std::invalid_argument("export: unknown player id");
    std::copy(src.row_ptr(local), src.row_ptr(local) + src.cols,
              ex.embeddings.row_ptr(static_cast<int>(r)));
    ex.labels.push_back(dataset.players[player_ids[r]].true_label);
  }
  return ex;
}

// Writes <prefix>_embeddings.tsv (one row per player) and <prefix>_labels.tsv
// (player_id <tab> label).
inline void write_embedding_export(const EmbeddingExport& ex, const std::string& prefix) {
  std::ofstream emb(prefix + "_embeddings.tsv");
  if (!emb) throw std::runtime_error("cannot write " + prefix + "_embeddings.tsv");
  for (int r = 0; r < ex.embeddings.rows; ++r) {
    for (int c = 0; c < ex.embeddings.cols; ++c) {
      if (c) emb << '\t';
      emb << ex.embeddings(r, c);
    }
    emb << '\n';
  }
  std::ofstream lab(prefix + "_labels.tsv");
  if (!lab) throw std::runtime_error("cannot write " + prefix + "_labels.tsv");
  for (size_t r = 0; r < ex.player_ids.size(); ++r)
    lab << ex.player_ids[r] << '\t' << ex.labels[r] << '\n';
}

}  // namespace pugnn
