#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pugnn/ablation.hpp"
#include "pugnn/baselines.hpp"
#include "pugnn/config_file.hpp"
#include "pugnn/dataset_io.hpp"
#include "pugnn/synth_data.hpp"

using namespace pugnn;

namespace {

// Linearly separable toy: fraud logs are all event 3, benign all event 5.
Dataset separable_toy(int n = 120, bool with_edges = false) {
  Dataset ds;
  ds.generator_config.num_players = n;
  ds.generator_config.fraud_fraction = 0.3;
  ds.generator_config.seq_len = 6;
  ds.generator_config.vocab_size = 8;
  ds.generator_config.edge_feature_dim = 2;
  ds.generator_config.ring_size_min = 2;
  ds.generator_config.ring_size_max = 2;
  ds.seed = 9;
  for (int i = 0; i < n; ++i) {
    PlayerRecord p;
    p.player_id = i;
    p.true_label = i % 3 == 0 ? 1 : -1;  // one third fraud
    p.activity_sequence.assign(6, p.true_label == 1 ? 3 : 5);
    ds.players.push_back(std::move(p));
  }
  if (with_edges)
    for (int i = 0; i + 1 < n; i += 7) ds.edges.push_back({i, i + 1, {1.0, 0.5}});
  ds.split_assignment.resize(n);
  for (int i = 0; i < n; ++i)
    ds.split_assignment[i] =
        i % 5 == 3 ? Split::kValidation : (i % 5 == 4 ? Split::kTest : Split::kTrain);
  for (int i = 0; i < n; ++i)
    if (ds.split_assignment[i] == Split::kTrain)
      ds.train_label[i] = ds.players[i].true_label == 1 ? 1 : 0;
  ds.pi_p = 1.0 / 3.0;
  return ds;
}

TrainConfig baseline_cfg(uint64_t seed = 7) {
  TrainConfig cfg;
  cfg.gnn_hidden = 16;
  cfg.learning_rate = 0.05;
  cfg.max_epochs = 120;
  cfg.patience = 40;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("MLP reaches F1 1 on linearly separable toy features") {
  Dataset ds = separable_toy();
  MetricsReport m = baseline_mlp(ds, baseline_cfg());
  CHECK(m.f1 == doctest::Approx(1.0));
  CHECK(m.auc == doctest::Approx(1.0));
}

TEST_CASE("zero-edge graph: mean-GNN degenerates to a per-node transform, F1 matches MLP") {
  Dataset ds = separable_toy(120, /*with_edges=*/false);
  MetricsReport mlp = baseline_mlp(ds, baseline_cfg());
  MetricsReport gnn = baseline_mean_gnn(ds, baseline_cfg());
  CHECK(gnn.f1 == doctest::Approx(mlp.f1).epsilon(0.02));
  CHECK(gnn.f1 == doctest::Approx(1.0));
}

TEST_CASE("histogram features: normalized counts over non-pad events") {
  Dataset ds = separable_toy(12);
  ds.players[0].activity_sequence = {0, 0, 3, 3, 5, 7};
  Mat h = histogram_features(ds, {0});
  CHECK(h(0, 3) == doctest::Approx(0.5));
  CHECK(h(0, 5) == doctest::Approx(0.25));
  CHECK(h(0, 7) == doctest::Approx(0.25));
  CHECK(h(0, 0) == 0.0);  // pad never counted
}

TEST_CASE("ablation variants: resolved configs differ only in the intended fields") {
  TrainConfig base;
  base.loss_mode = LossMode::kNnpu;
  base.smote_enabled = true;

  TrainConfig wo_pu = resolve_ablation(base, AblationVariant::kWoPu);
  auto base_snap = train_config_snapshot(base);
  auto wo_pu_snap = train_config_snapshot(wo_pu);
  int diffs = 0;
  for (const auto& [k, v] : base_snap)
    if (wo_pu_snap.at(k) != v) {
      ++diffs;
      CHECK(k == "loss_mode");
    }
  CHECK(diffs == 1);

  TrainConfig wo_smote = resolve_ablation(base, AblationVariant::kWoSmote);
  CHECK(wo_smote.loss_mode == LossMode::kNnpu);
  CHECK(!wo_smote.smote_enabled);

  TrainConfig wo_both = resolve_ablation(base, AblationVariant::kWoBoth);
  CHECK(wo_both.loss_mode == LossMode::kCe);
  CHECK(!wo_both.smote_enabled);
}

TEST_CASE("ablation grid emits 4 variants x 4 metrics plus CSV and PNG") {
  namespace fs = std::filesystem;
  GeneratorConfig gen;
  gen.num_players = 200;
  gen.fraud_fraction = 0.15;
  gen.seq_len = 6;
  gen.vocab_size = 12;
  gen.ring_size_min = 3;
  gen.ring_size_max = 4;
  gen.seed = 5;
  Dataset ds = generate_full(gen);

  TrainConfig cfg;
  cfg.embed_dim = 4;
  cfg.attention_blocks = 1;
  cfg.gnn_hidden = 8;
  cfg.learning_rate = 0.03;
  cfg.max_epochs = 6;
  cfg.patience = 6;
  cfg.num_runs = 1;
  cfg.smote_k = 3;
  cfg.seed = 2;

  fs::path dir = fs::temp_directory_path() / "pugnn_grid_test";
  fs::remove_all(dir);
  auto rows = run_ablation_grid(ds, cfg, dir.string());
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.metrics.runs.size() == 1);
    CHECK(r.metrics.f1_mean >= 0.0);
    CHECK(r.metrics.auc_mean >= 0.0);
    CHECK(r.metrics.tpr_mean >= 0.0);
    CHECK(r.metrics.tnr_mean >= 0.0);
  }
  CHECK(fs::exists(dir / "ablation.csv"));
  CHECK(fs::exists(dir / "ablation.png"));
  // PNG signature
  std::ifstream png(dir / "ablation.png", std::ios::binary);
  unsigned char sig[8];
  png.read(reinterpret_cast<char*>(sig), 8);
  CHECK(sig[0] == 137);
  CHECK(sig[1] == 'P');
  CHECK(sig[2] == 'N');
  CHECK(sig[3] == 'G');
  // CSV header plus one row per variant
  std::ifstream csv(dir / "ablation.csv");
  int lines = 0;
  std::string line;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 5);
  fs::remove_all(dir);
}

TEST_CASE("embedding export widths per stage") {
  GeneratorConfig gen;
  gen.num_players = 60;
  gen.fraud_fraction = 0.2;
  gen.seq_len = 5;
  gen.vocab_size = 10;
  gen.ring_size_min = 2;
  gen.ring_size_max = 3;
  gen.seed = 3;
  Dataset ds = generate_full(gen);

  // paper-default width: d = 64 gives behavior rows of width 128
  TrainConfig cfg;
  cfg.embed_dim = 64;
  cfg.attention_blocks = 1;
  cfg.gnn_hidden = 8;
  Rng rng(4);
  PuGnnModel model;
  model.init(cfg, ds.generator_config.vocab_size, ds.generator_config.edge_feature_dim, rng);

  EmbeddingExport behavior = export_embeddings_for_projection(model, ds, EmbeddingStage::kBehavior);
  CHECK(behavior.embeddings.cols == 128);
  CHECK(behavior.embeddings.rows == ds.num_players());

  EmbeddingExport graph = export_embeddings_for_projection(model, ds, EmbeddingStage::kGraph);
  CHECK(graph.embeddings.cols == 2 * cfg.gnn_hidden);

  EmbeddingExport both = export_embeddings_for_projection(model, ds, EmbeddingStage::kBoth);
  CHECK(both.embeddings.cols == behavior.embeddings.cols + graph.embeddings.cols);

  // requested subset controls the row count
  EmbeddingExport few = export_embeddings_for_projection(model, ds, EmbeddingStage::kBehavior, {3, 7, 11});
  CHECK(few.embeddings.rows == 3);
  CHECK(few.player_ids == std::vector<int>({3, 7, 11}));
  CHECK(few.labels.size() == 3);

  CHECK_THROWS_AS(embedding_stage_from_name("bogus"), std::invalid_argument);

  namespace fs = std::filesystem;
  fs::path prefix = fs::temp_directory_path() / "pugnn_embed";
  write_embedding_export(few, prefix.string());
  CHECK(fs::exists(prefix.string() + "_embeddings.tsv"));
  CHECK(fs::exists(prefix.string() + "_labels.tsv"));
  fs::remove(prefix.string() + "_embeddings.tsv");
  fs::remove(prefix.string() + "_labels.tsv");
}

TEST_CASE("config files: round-trip parsing, unknown keys rejected") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "pugnn_cfg_test.cfg";
  {
    std::ofstream f(path);
    f << "# comment line\n";
    f << "embed_dim = 24\n";
    f << "loss_mode = upu\n";
    f << "smote_enabled = false\n";
    f << "learning_rate = 0.5  # trailing comment\n";
  }
  TrainConfig cfg = load_train_config(path.string());
  CHECK(cfg.embed_dim == 24);
  CHECK(cfg.loss_mode == LossMode::kUpu);
  CHECK(!cfg.smote_enabled);
  CHECK(cfg.learning_rate == 0.5);
  CHECK(cfg.patience == 10);  // untouched default

  {
    std::ofstream f(path, std::ios::app);
    f << "not_a_real_key = 3\n";
  }
  CHECK_THROWS_WITH_AS(load_train_config(path.string()), doctest::Contains("unknown config key"),
                       std::runtime_error);
  fs::remove(path);

  CHECK_THROWS_AS(load_train_config("/nonexistent/path.cfg"), std::runtime_error);
}

TEST_CASE("repo config files parse and validate") {
  CHECK(load_generator_config("configs/gen_small.cfg").num_players == 300);
  CHECK(load_generator_config("configs/gen_bench.cfg").num_players == 2000);
  CHECK(load_generator_config("configs/gen_large.cfg").num_players == 32900);
  CHECK(load_train_config("configs/train_default.cfg").embed_dim == 64);
  CHECK(load_train_config("configs/train_default.cfg").attention_blocks == 5);
  CHECK(load_train_config("configs/train_default.cfg").patience == 10);
  CHECK(load_train_config("configs/train_bench.cfg").loss_mode == LossMode::kNnpu);
  // the in-code bench preset stays identical to the frozen config file
  GeneratorConfig file_cfg = load_generator_config("configs/gen_bench.cfg");
  GeneratorConfig code_cfg = bench_preset(1);
  CHECK(generator_config_to_json(file_cfg) == generator_config_to_json(code_cfg));
}
