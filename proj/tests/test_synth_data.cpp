#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "pugnn/dataset_io.hpp"
#include "pugnn/synth_data.hpp"

using namespace pugnn;

namespace {

GeneratorConfig tiny_config(uint64_t seed = 7) {
  GeneratorConfig cfg;
  cfg.num_players = 100;
  cfg.fraud_fraction = 0.2;
  cfg.ring_size_min = 3;
  cfg.ring_size_max = 5;
  cfg.seed = seed;
  return cfg;
}

std::string read_file(const std::string& p) {
  std::ifstream f(p);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Event-type histogram over non-pad events of the given players.
std::vector<double> histogram(const Dataset& ds, const std::vector<int>& pids) {
  std::vector<double> h(ds.generator_config.vocab_size, 0.0);
  double total = 0.0;
  for (int pid : pids)
    for (int ev : ds.players[pid].activity_sequence)
      if (ev != 0) {
        h[ev] += 1.0;
        total += 1.0;
      }
  for (double& v : h) v /= total;
  return h;
}

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  auto kl = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0.0) s += a[i] * std::log(a[i] / b[i]);
    return s;
  };
  std::vector<double> m(p.size());
  for (size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl(p, m) + 0.5 * kl(q, m);
}

double directed_density(const Dataset& ds, const std::set<int>& nodes) {
  if (nodes.size() < 2) return 0.0;
  double within = 0.0;
  for (const auto& e : ds.edges)
    if (nodes.count(e.src) && nodes.count(e.dst)) within += 1.0;
  double n = static_cast<double>(nodes.size());
  return within / (n * (n - 1.0));
}

}  // namespace

TEST_CASE("generate_dataset: exact fraud count and determinism") {
  Dataset a = generate_dataset(tiny_config());
  Dataset b = generate_dataset(tiny_config());
  int frauds = 0;
  for (const auto& p : a.players) frauds += p.true_label == 1;
  CHECK(frauds == 20);
  CHECK(a == b);
  CHECK(a.num_players() == 100);
}

TEST_CASE("generate_dataset: config validation names the violated invariant") {
  GeneratorConfig bad = tiny_config();
  bad.fraud_fraction = 1.5;
  CHECK_THROWS_WITH_AS(generate_dataset(bad), doctest::Contains("fraud_fraction"),
                       std::invalid_argument);
  bad = tiny_config();
  bad.split_train = 0.9;  // fractions no longer sum to 1
  CHECK_THROWS_WITH_AS(generate_dataset(bad), doctest::Contains("sum to 1"), std::invalid_argument);
  bad = tiny_config();
  bad.num_players = 20;  // 4 frauds < 2 * ring_size_max
  CHECK_THROWS_WITH_AS(generate_dataset(bad), doctest::Contains("ring"), std::invalid_argument);
}

TEST_CASE("generate_dataset: sequences are left-padded to n with valid event ids") {
  Dataset ds = generate_dataset(tiny_config());
  for (const auto& p : ds.players) {
    REQUIRE(static_cast<int>(p.activity_sequence.size()) == ds.generator_config.seq_len);
    bool seen_event = false;
    for (int ev : p.activity_sequence) {
      CHECK(ev >= 0);
      CHECK(ev < ds.generator_config.vocab_size);
      if (ev != 0) seen_event = true;
      if (seen_event) CHECK(ev != 0);  // pads only on the left
    }
    CHECK(seen_event);  // every player has at least one event
  }
}

TEST_CASE("generate_dataset: no self-transfers, endpoints valid") {
  Dataset ds = generate_dataset(tiny_config());
  CHECK(!ds.edges.empty());
  for (const auto& e : ds.edges) {
    CHECK(e.src != e.dst);
    CHECK(e.src >= 0);
    CHECK(e.dst < ds.num_players());
    CHECK(e.features.size() == 2);
    CHECK(e.features[0] >= 0.0);          // amount
    CHECK(e.features[1] >= 0.0);          // normalized time
    CHECK(e.features[1] <= 1.0);
  }
}

TEST_CASE("large preset matches the published graph scale within 10 percent") {
  Dataset ds = generate_dataset(large_preset(1));
  CHECK(ds.num_players() == 32900);
  double edges = static_cast<double>(ds.edges.size());
  CHECK(edges > 62400.0 * 0.9);
  CHECK(edges < 62400.0 * 1.1);
}

TEST_CASE("behavioral signal: fraud-vs-benign JS divergence exceeds benign-vs-benign") {
  Dataset ds = generate_dataset(small_preset(3));
  std::vector<int> fraud, benign_a, benign_b;
  int flip = 0;
  for (const auto& p : ds.players) {
    if (p.true_label == 1)
      fraud.push_back(p.player_id);
    else
      (flip++ % 2 ? benign_a : benign_b).push_back(p.player_id);
  }
  double d_fraud = js_divergence(histogram(ds, fraud), histogram(ds, benign_a));
  double d_benign = js_divergence(histogram(ds, benign_a), histogram(ds, benign_b));
  CHECK(d_fraud > d_benign);
  CHECK(d_fraud > 5.0 * d_benign);  // the planted signal is not marginal
}

TEST_CASE("planted structure: fraud subgraph density exceeds benign subgraph density") {
  Dataset ds = generate_dataset(small_preset(4));
  std::set<int> fraud, benign;
  for (const auto& p : ds.players)
    (p.true_label == 1 ? fraud : benign).insert(p.player_id);
  CHECK(directed_density(ds, fraud) > directed_density(ds, benign));
}

TEST_CASE("split_dataset random: exact fractions, every player in exactly one split") {
  GeneratorConfig cfg = tiny_config();
  Dataset ds = split_dataset(generate_dataset(cfg), SplitMode::kRandom);
  int tr = 0, va = 0, te = 0;
  for (Split s : ds.split_assignment) {
    tr += s == Split::kTrain;
    va += s == Split::kValidation;
    te += s == Split::kTest;
  }
  CHECK(tr == 60);
  CHECK(va == 20);
  CHECK(te == 20);
}

TEST_CASE("split_dataset chronological: max train timestamp <= min test timestamp") {
  Dataset ds = split_dataset(generate_dataset(tiny_config()), SplitMode::kChronological);
  std::vector<double> first_ts(ds.num_players(), std::numeric_limits<double>::infinity());
  for (const auto& e : ds.edges) {
    first_ts[e.src] = std::min(first_ts[e.src], e.features[1]);
    first_ts[e.dst] = std::min(first_ts[e.dst], e.features[1]);
  }
  double max_train = -1.0, min_test = 2.0;
  for (int i = 0; i < ds.num_players(); ++i) {
    if (!std::isfinite(first_ts[i])) continue;
    if (ds.split_assignment[i] == Split::kTrain) max_train = std::max(max_train, first_ts[i]);
    if (ds.split_assignment[i] == Split::kTest) min_test = std::min(min_test, first_ts[i]);
  }
  CHECK(max_train <= min_test);
}

TEST_CASE("split_dataset chronological requires timestamps") {
  GeneratorConfig cfg = tiny_config();
  cfg.edge_feature_dim = 1;  // amount only
  Dataset ds = generate_dataset(cfg);
  CHECK_THROWS_WITH_AS(split_dataset(ds, SplitMode::kChronological), doctest::Contains("timestamp"),
                       std::invalid_argument);
}

TEST_CASE("large preset split proportions track the published 12.9K:10.8K:9.3K") {
  Dataset ds = split_dataset(generate_dataset(large_preset(1)), SplitMode::kRandom);
  int tr = 0, va = 0, te = 0;
  for (Split s : ds.split_assignment) {
    tr += s == Split::kTrain;
    va += s == Split::kValidation;
    te += s == Split::kTest;
  }
  CHECK(std::abs(tr - 12900) < 650);  // within 5%
  CHECK(std::abs(va - 10800) < 550);
  CHECK(std::abs(te - 9300) < 500);
}

TEST_CASE("apply_pu_masking: exact labeled count, everyone else unlabeled") {
  Dataset ds = split_dataset(generate_dataset(tiny_config()), SplitMode::kRandom);
  Dataset masked = apply_pu_masking(ds, 0.5);
  std::vector<int> train = masked.players_in(Split::kTrain);
  int train_frauds = 0;
  for (int pid : train) train_frauds += masked.players[pid].true_label == 1;

  int labeled = 0, unlabeled = 0;
  for (const auto& [pid, lab] : masked.train_label) {
    labeled += lab == 1;
    unlabeled += lab == 0;
    if (lab == 1) CHECK(masked.players[pid].true_label == 1);
  }
  CHECK(labeled == static_cast<int>(0.5 * train_frauds + 0.5));
  CHECK(labeled + unlabeled == static_cast<int>(train.size()));
  // defined exactly on the train split
  CHECK(static_cast<int>(masked.train_label.size()) == static_cast<int>(train.size()));
  // ground-truth prior recorded
  CHECK(masked.pi_p == doctest::Approx(static_cast<double>(train_frauds) / train.size()));
}

TEST_CASE("apply_pu_masking: fraction 1.0 labels all frauds, unlabeled = benign set") {
  Dataset ds = split_dataset(generate_dataset(tiny_config()), SplitMode::kRandom);
  Dataset masked = apply_pu_masking(ds, 1.0);
  for (const auto& [pid, lab] : masked.train_label) {
    if (masked.players[pid].true_label == 1)
      CHECK(lab == 1);
    else
      CHECK(lab == 0);
  }
}

TEST_CASE("apply_pu_masking: different seeds give different subsets of equal size") {
  Dataset ds = split_dataset(generate_dataset(tiny_config()), SplitMode::kRandom);
  Dataset a = apply_pu_masking(ds, 0.5);
  ds.seed += 1;  // masking randomness derives from the dataset seed
  Dataset b = apply_pu_masking(ds, 0.5);
  std::set<int> la, lb;
  for (const auto& [pid, lab] : a.train_label)
    if (lab == 1) la.insert(pid);
  for (const auto& [pid, lab] : b.train_label)
    if (lab == 1) lb.insert(pid);
  CHECK(la.size() == lb.size());
  CHECK(la != lb);
}

TEST_CASE("apply_pu_masking rejects fractions outside (0,1]") {
  Dataset ds = split_dataset(generate_dataset(tiny_config()), SplitMode::kRandom);
  CHECK_THROWS_AS(apply_pu_masking(ds, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_pu_masking(ds, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(apply_pu_masking(ds, -0.5), std::invalid_argument);
}

TEST_CASE("save/load round-trip is the identity and byte-identical across runs") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "pugnn_ds_roundtrip";
  fs::remove_all(dir);

  Dataset ds = generate_full(tiny_config());
  save_dataset(ds, dir.string());
  Dataset loaded = load_dataset(dir.string());
  CHECK(loaded == ds);
  CHECK(loaded.generator_config.vocab_size == ds.generator_config.vocab_size);

  fs::path dir2 = fs::temp_directory_path() / "pugnn_ds_roundtrip2";
  fs::remove_all(dir2);
  save_dataset(generate_full(tiny_config()), dir2.string());
  for (const char* name : {"players.txt", "edges.csv", "meta.json"})
    CHECK(read_file((dir / name).string()) == read_file((dir2 / name).string()));

  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("load_dataset rejects malformed files with line numbers") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "pugnn_ds_malformed";
  fs::remove_all(dir);
  save_dataset(generate_full(tiny_config()), dir.string());

  SUBCASE("edge referencing unknown player") {
    std::ofstream f(dir / "edges.csv", std::ios::app);
    f << "5000,1,1.0,0.5\n";
    f.close();
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("unknown player"),
                         std::runtime_error);
  }
  SUBCASE("empty players file") {
    std::ofstream f(dir / "players.txt", std::ios::trunc);
    f.close();
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), doctest::Contains("empty dataset"),
                         std::runtime_error);
  }
  SUBCASE("garbage player line carries its line number") {
    std::ofstream f(dir / "players.txt", std::ios::app);
    f << "not a player record\n";
    f.close();
    try {
      load_dataset(dir.string());
      FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("players.txt:101") != std::string::npos);
    }
  }
  fs::remove_all(dir);
}
