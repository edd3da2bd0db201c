// pugnn: PU-learning graph fraud-detection toolkit.
//
// Subcommands:
//   generate  --config <file> --seed <int> --out <dir>
//   train     --data <dir> --config <file> --out <dir> [--seed] [--runs]
//   evaluate  --model <ckpt> --data <dir> [--out <dir>]
//   ablate    --data <dir> --config <file> --out <dir> [--seed] [--runs]
//
// Every run writes a manifest.json into its output directory with the
// resolved config snapshot, seeds, artifact paths, version tag and wall
// time. Inputs are never mutated; all outputs land under --out.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pugnn/ablation.hpp"
#include "pugnn/baselines.hpp"
#include "pugnn/checkpoint.hpp"
#include "pugnn/config_file.hpp"
#include "pugnn/dataset_io.hpp"
#include "pugnn/synth_data.hpp"
#include "pugnn/training.hpp"

namespace {

constexpr const char* kVersion = "pugnn 0.1.0";

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Written atomically: compose, dump to a temp file, rename into place.
void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const std::map<std::string, std::string>& config_snapshot,
                    const std::vector<uint64_t>& seeds, const std::vector<std::string>& artifacts,
                    double duration_seconds) {
  nlohmann::json m;
  m["subcommand"] = subcommand;
  m["config"] = config_snapshot;
  m["seeds"] = seeds;
  m["artifacts"] = artifacts;
  m["version"] = kVersion;
  m["duration_seconds"] = duration_seconds;
  fs::path tmp = fs::path(out_dir) / "manifest.json.tmp";
  fs::path final_path = fs::path(out_dir) / "manifest.json";
  {
    std::ofstream f(tmp);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << m.dump(2) << '\n';
  }
  fs::rename(tmp, final_path);
}

std::map<std::string, std::string> generator_snapshot(const pugnn::GeneratorConfig& cfg) {
  std::map<std::string, std::string> snap;
  nlohmann::json j = pugnn::generator_config_to_json(cfg);
  for (auto& [k, v] : j.items()) snap[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return snap;
}

nlohmann::json metrics_json(const pugnn::MetricsReport& m) {
  nlohmann::json j;
  j["f1"] = m.f1;
  j["auc"] = m.auc;
  j["tpr"] = m.tpr;
  j["tnr"] = m.tnr;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["tn"] = m.tn;
  return j;
}

int cmd_generate(const std::string& config_path, uint64_t seed, bool seed_set,
                 const std::string& out_dir) {
  auto t0 = Clock::now();
  pugnn::GeneratorConfig cfg = pugnn::load_generator_config(config_path);
  if (seed_set) cfg.seed = seed;
  pugnn::Dataset ds = pugnn::generate_full(cfg);
  fs::create_directories(out_dir);
  pugnn::save_dataset(ds, out_dir);
  double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(out_dir, "generate", generator_snapshot(cfg), {cfg.seed},
                 {"players.txt", "edges.csv", "meta.json"}, secs);
  std::printf("generated %d players, %zu edges -> %s\n", ds.num_players(), ds.edges.size(),
              out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path, const std::string& out_dir,
              uint64_t seed, bool seed_set, int runs, bool runs_set) {
  auto t0 = Clock::now();
  pugnn::Dataset ds = pugnn::load_dataset(data_dir);
  pugnn::TrainConfig cfg = pugnn::load_train_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (runs_set) cfg.num_runs = runs;
  cfg.validate();

  pugnn::RepeatedRuns rr = pugnn::run_repeated(ds, cfg);
  fs::create_directories(out_dir);

  // best-validation run provides the exported checkpoint
  size_t best = 0;
  for (size_t r = 1; r < rr.models.size(); ++r)
    if (rr.models[r].best_val_f1 > rr.models[best].best_val_f1) best = r;
  std::string ckpt = (fs::path(out_dir) / "checkpoint.txt").string();
  pugnn::save_checkpoint(rr.models[best], ckpt);

  {
    std::ofstream hist(fs::path(out_dir) / "history.csv");
    hist << "run,seed,epoch,train_loss,val_f1\n";
    for (size_t r = 0; r < rr.models.size(); ++r)
      for (const auto& rec : rr.models[r].history)
        hist << r << ',' << rr.models[r].config.seed << ',' << rec.epoch << ',' << rec.train_loss
             << ',' << rec.val_f1 << '\n';
  }
  {
    nlohmann::json rep;
    rep["num_runs"] = cfg.num_runs;
    rep["pi_p"] = rr.models[0].pi_p;
    rep["best_run"] = best;
    rep["mean"] = {{"f1", rr.test_metrics.f1_mean},
                   {"auc", rr.test_metrics.auc_mean},
                   {"tpr", rr.test_metrics.tpr_mean},
                   {"tnr", rr.test_metrics.tnr_mean}};
    rep["std"] = {{"f1", rr.test_metrics.f1_std},
                  {"auc", rr.test_metrics.auc_std},
                  {"tpr", rr.test_metrics.tpr_std},
                  {"tnr", rr.test_metrics.tnr_std}};
    for (size_t r = 0; r < rr.test_metrics.runs.size(); ++r) {
      nlohmann::json run = metrics_json(rr.test_metrics.runs[r]);
      run["seed"] = rr.models[r].config.seed;
      run["best_epoch"] = rr.models[r].best_epoch;
      run["best_val_f1"] = rr.models[r].best_val_f1;
      rep["runs"].push_back(run);
    }
    std::ofstream f(fs::path(out_dir) / "report.json");
    f << rep.dump(2) << '\n';
  }

  std::vector<uint64_t> seeds;
  for (int r = 0; r < cfg.num_runs; ++r) seeds.push_back(cfg.seed + r);
  double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(out_dir, "train", pugnn::train_config_snapshot(cfg), seeds,
                 {"checkpoint.txt", "history.csv", "report.json"}, secs);
  std::printf("trained %d run(s): test F1 %.4f +- %.4f, AUC %.4f -> %s\n", cfg.num_runs,
              rr.test_metrics.f1_mean, rr.test_metrics.f1_std, rr.test_metrics.auc_mean,
              out_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::string& out_dir) {
  auto t0 = Clock::now();
  pugnn::Dataset ds = pugnn::load_dataset(data_dir);
  pugnn::TrainedModel tm = pugnn::load_checkpoint(model_path);
  if (tm.model.encoder.cfg.vocab_size != ds.generator_config.vocab_size)
    throw std::runtime_error("checkpoint vocabulary does not match the dataset");
  if (tm.model.graph_model.cfg.edge_feature_dim != ds.generator_config.edge_feature_dim)
    throw std::runtime_error("checkpoint edge feature width does not match the dataset");
  pugnn::MetricsReport m = pugnn::evaluate_test(tm.model, ds);
  nlohmann::json rep = metrics_json(m);
  rep["checkpoint"] = model_path;
  std::printf("%s\n", rep.dump(2).c_str());
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "metrics.json");
    f << rep.dump(2) << '\n';
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    write_manifest(out_dir, "evaluate", {{"model", model_path}, {"data", data_dir}}, {},
                   {"metrics.json"}, secs);
  }
  return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& config_path, const std::string& out_dir,
               uint64_t seed, bool seed_set, int runs, bool runs_set) {
  auto t0 = Clock::now();
  pugnn::Dataset ds = pugnn::load_dataset(data_dir);
  pugnn::TrainConfig cfg = pugnn::load_train_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (runs_set) cfg.num_runs = runs;
  if (cfg.loss_mode == pugnn::LossMode::kCe)
    throw std::runtime_error("ablate: base config must use a PU loss (nnpu or upu)");
  fs::create_directories(out_dir);
  auto rows = pugnn::run_ablation_grid(ds, cfg, out_dir);
  for (const auto& r : rows)
    std::printf("%-9s F1 %.4f +- %.4f  AUC %.4f  TPR %.4f  TNR %.4f\n",
                pugnn::ablation_name(r.variant), r.metrics.f1_mean, r.metrics.f1_std,
                r.metrics.auc_mean, r.metrics.tpr_mean, r.metrics.tnr_mean);
  std::vector<uint64_t> seeds;
  for (int r = 0; r < cfg.num_runs; ++r) seeds.push_back(cfg.seed + r);
  double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(out_dir, "ablate", pugnn::train_config_snapshot(cfg), seeds,
                 {"ablation.csv", "ablation.png"}, secs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PU-learning graph fraud detection on synthetic P2E transaction benchmarks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, model_path;
  uint64_t seed = 0;
  int runs = 0;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  gen->add_option("--config", config_path, "generator config file")->required();
  auto* gen_seed = gen->add_option("--seed", seed, "generator seed (overrides config)");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "Train the PU GNN with repeated seeds");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--config", config_path, "training config file")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  auto* train_seed = train->add_option("--seed", seed, "base seed (overrides config)");
  auto* train_runs = train->add_option("--runs", runs, "number of runs (overrides config)");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  eval->add_option("--model", model_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_dir, "optional output directory for metrics.json");

  auto* ablate = app.add_subcommand("ablate", "Run the PU/SMOTE ablation grid");
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--config", config_path, "base training config file")->required();
  ablate->add_option("--out", out_dir, "output directory")->required();
  auto* ablate_seed = ablate->add_option("--seed", seed, "base seed (overrides config)");
  auto* ablate_runs = ablate->add_option("--runs", runs, "number of runs (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help/--version exit 0, usage errors exit 2
  }

  try {
    if (gen->parsed()) return cmd_generate(config_path, seed, !gen_seed->empty(), out_dir);
    if (train->parsed())
      return cmd_train(data_dir, config_path, out_dir, seed, !train_seed->empty(), runs,
                       !train_runs->empty());
    if (eval->parsed()) return cmd_evaluate(model_path, data_dir, out_dir);
    if (ablate->parsed())
      return cmd_ablate(data_dir, config_path, out_dir, seed, !ablate_seed->empty(), runs,
                        !ablate_runs->empty());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
