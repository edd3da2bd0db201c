#pragma once

// Synthetic play-to-earn transaction benchmark with planted fraud structure.
// Fraud players concentrate their activity logs on a small mining/purchase
// event subset and are organized into collusion rings that funnel tokens to
// a sink member (star plus chain motifs). Benign players draw diverse
// sequences and sparse random edges. A configurable share of benign
// "grinders" mimics the fraud event focus and a share of fraud "mules"
// mimics benign sequences, so neither signal channel is sufficient alone.

#include <algorithm>
#include <limits>
#include <numeric>

#include "pugnn/dataset.hpp"
#include "pugnn/rng.hpp"

namespace pugnn {

namespace detail {

// Event ids [1, num_hot] are the mining/purchase subset; 0 is the pad id.
inline int num_hot_events(const GeneratorConfig& cfg) {
  return std::max(2, cfg.vocab_size / 8);
}

inline int draw_event(Rng& rng, const GeneratorConfig& cfg, double focus_prob) {
  int hot = num_hot_events(cfg);
  if (rng.uniform() < focus_prob) return 1 + rng.uniform_int(hot);
  return 1 + rng.uniform_int(cfg.vocab_size - 1);
}

inline std::vector<int> draw_sequence(Rng& rng, const GeneratorConfig& cfg, double focus_prob,
                                      int min_len) {
  int len = rng.uniform_int(std::max(1, min_len), cfg.seq_len);
  std::vector<int> seq(cfg.seq_len, 0);  // left-padded
  for (int t = cfg.seq_len - len; t < cfg.seq_len; ++t) seq[t] = draw_event(rng, cfg, focus_prob);
  return seq;
}

// Benign players draw events uniformly over the non-pad vocabulary.
constexpr double kBenignFocusProb = 0.0;

}  // namespace detail

struct RingLayout {
  std::vector<std::vector<int>> rings;  // member ids; first member is the sink
};

// Deterministic generation: all randomness derives from (config.seed,
// player_id) substreams plus fixed-tag master streams, so players can be
// generated in any order with identical results.
inline Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  const int N = config.num_players;
  const int n_fraud = config.num_fraud();

  Dataset ds;
  ds.generator_config = config;
  ds.seed = config.seed;

  // fraud assignment: shuffled ids, first n_fraud are fraud
  Rng assign_rng = Rng::substream(config.seed, 0xA551);
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  assign_rng.shuffle(order);
  std::vector<uint8_t> is_fraud(N, 0);
  for (int i = 0; i < n_fraud; ++i) is_fraud[order[i]] = 1;

  // collusion rings over the fraud players
  Rng ring_rng = Rng::substream(config.seed, 0x516);
  RingLayout layout;
  {
    std::vector<int> pool;
    for (int i = 0; i < n_fraud; ++i) pool.push_back(order[i]);
    ring_rng.shuffle(pool);
    size_t at = 0;
    while (pool.size() - at >= static_cast<size_t>(config.ring_size_min)) {
      int want = ring_rng.uniform_int(config.ring_size_min, config.ring_size_max);
      size_t take = std::min(static_cast<size_t>(want), pool.size() - at);
      layout.rings.emplace_back(pool.begin() + at, pool.begin() + at + take);
      at += take;
    }
    // leftovers too small for a ring of their own join the last ring
    if (at < pool.size() && !layout.rings.empty())
      layout.rings.back().insert(layout.rings.back().end(), pool.begin() + at, pool.end());
  }

  // player roles and sequences
  ds.players.resize(N);
  for (int i = 0; i < N; ++i) {
    Rng rng = Rng::substream(config.seed, 1000 + static_cast<uint64_t>(i));
    PlayerRecord& p = ds.players[i];
    p.player_id = i;
    p.true_label = is_fraud[i] ? 1 : -1;
    if (is_fraud[i]) {
      bool mule = rng.uniform() < config.mule_fraction;
      double focus = mule ? detail::kBenignFocusProb : config.fraud_focus_prob;
      p.activity_sequence = detail::draw_sequence(rng, config, focus, config.seq_len / 2);
    } else {
      bool grinder = rng.uniform() < config.grinder_fraction;
      double focus = grinder ? config.grinder_focus_prob : detail::kBenignFocusProb;
      p.activity_sequence = detail::draw_sequence(rng, config, focus, config.seq_len / 4);
    }
  }

  const int F_e = config.edge_feature_dim;
  auto make_features = [&](Rng& rng, bool ring_edge, double ring_t0) {
    std::vector<double> f(F_e);
    // token amounts on a log-like scale; ring transfers are larger and tighter
    f[0] = ring_edge ? rng.uniform(2.0, 3.5) : rng.uniform(0.05, 1.5);
    if (F_e >= 2) f[1] = ring_edge ? ring_t0 + rng.uniform(0.0, 0.1) : rng.uniform(0.0, 1.0);
    for (int k = 2; k < F_e; ++k) f[k] = rng.uniform(0.0, 1.0);
    return f;
  };

  // ring edges: star onto the sink, a probabilistic member chain and extra
  // intra-ring transfers so split-induced fragments keep graph evidence
  for (size_t r = 0; r < layout.rings.size(); ++r) {
    Rng rng = Rng::substream(config.seed, 0xE000 + static_cast<uint64_t>(r));
    const auto& ring = layout.rings[r];
    int sink = ring[0];
    double t0 = rng.uniform(0.0, 0.9);
    for (size_t k = 1; k < ring.size(); ++k) {
      ds.edges.push_back({ring[k], sink, make_features(rng, true, t0)});
      if (k + 1 < ring.size() && rng.uniform() < config.ring_chain_prob)
        ds.edges.push_back({ring[k], ring[k + 1], make_features(rng, true, t0)});
      if (ring.size() > 2 && rng.uniform() < config.ring_extra_edge_prob) {
        int other = ring[1 + rng.uniform_int(static_cast<int>(ring.size()) - 1)];
        if (other != ring[k]) ds.edges.push_back({ring[k], other, make_features(rng, true, t0)});
      }
    }
  }

  // background edges from every player
  for (int i = 0; i < N; ++i) {
    Rng rng = Rng::substream(config.seed, 0xB000000 + static_cast<uint64_t>(i));
    double rate = is_fraud[i] ? config.fraud_noise_edge_rate : config.benign_edge_rate;
    int deg = rng.poisson(rate);
    for (int k = 0; k < deg; ++k) {
      int dst = rng.uniform_int(N - 1);
      if (dst >= i) ++dst;  // no self-transfers
      ds.edges.push_back({i, dst, make_features(rng, false, 0.0)});
    }
  }

  ds.split_assignment.assign(N, Split::kTrain);
  return ds;
}

// Assigns players to train/validation/test. Random mode shuffles uniformly;
// chronological mode orders players by the timestamp of their earliest
// incident edge (players with no edges sort last, ties by id).
inline Dataset split_dataset(Dataset dataset, SplitMode mode) {
  const auto& cfg = dataset.generator_config;
  const int N = dataset.num_players();
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);

  if (mode == SplitMode::kRandom) {
    Rng rng = Rng::substream(dataset.seed, 0x51137);
    rng.shuffle(order);
  } else {
    if (cfg.edge_feature_dim < 2)
      throw std::invalid_argument("chronological split requires edge timestamps (edge feature 1)");
    std::vector<double> first_ts(N, std::numeric_limits<double>::infinity());
    for (const auto& e : dataset.edges) {
      first_ts[e.src] = std::min(first_ts[e.src], e.features[1]);
      first_ts[e.dst] = std::min(first_ts[e.dst], e.features[1]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return first_ts[a] < first_ts[b]; });
  }

  int n_train = static_cast<int>(cfg.split_train * N + 0.5);
  int n_val = static_cast<int>(cfg.split_validation * N + 0.5);
  n_train = std::min(n_train, N);
  n_val = std::min(n_val, N - n_train);
  for (int k = 0; k < N; ++k) {
    Split s = k < n_train ? Split::kTrain : (k < n_train + n_val ? Split::kValidation : Split::kTest);
    dataset.split_assignment[order[k]] = s;
  }
  dataset.train_label.clear();
  return dataset;
}

// PU masking protocol: a uniformly random labeled_positive_fraction of the
// train-split fraud players keep the +1 label; every other train player
// becomes unlabeled (0). Also records the ground-truth train prior pi_p.
inline Dataset apply_pu_masking(Dataset dataset, double labeled_positive_fraction) {
  if (!(labeled_positive_fraction > 0.0 && labeled_positive_fraction <= 1.0))
    throw std::invalid_argument("labeled_positive_fraction must lie in (0,1]");
  std::vector<int> train_players = dataset.players_in(Split::kTrain);
  std::vector<int> train_frauds;
  for (int pid : train_players)
    if (dataset.players[pid].true_label == 1) train_frauds.push_back(pid);

  int n_label = static_cast<int>(labeled_positive_fraction * train_frauds.size() + 0.5);
  Rng rng = Rng::substream(dataset.seed, 0x3A5C);
  rng.shuffle(train_frauds);

  dataset.train_label.clear();
  for (int pid : train_players) dataset.train_label[pid] = 0;
  for (int k = 0; k < n_label; ++k) dataset.train_label[train_frauds[k]] = 1;

  dataset.pi_p = train_players.empty()
                     ? 0.0
                     : static_cast<double>(train_frauds.size()) / train_players.size();
  return dataset;
}

// Full generation pipeline as run by the CLI.
inline Dataset generate_full(const GeneratorConfig& config) {
  Dataset ds = generate_dataset(config);
  ds = split_dataset(std::move(ds), config.split_mode);
  ds = apply_pu_masking(std::move(ds), config.labeled_positive_fraction);
  ds.validate();
  return ds;
}

// Preset calibrated so the large graph matches the published scale of the
// biggest real dataset (~32.9K nodes, ~62.4K edges) with split proportions
// close to 12.9K : 10.8K : 9.3K.
inline GeneratorConfig large_preset(uint64_t seed = 1) {
  GeneratorConfig cfg;
  cfg.num_players = 32900;
  cfg.fraud_fraction = 0.186;  // ~ 2.4K positives among 12.9K train players
  cfg.seq_len = 16;
  cfg.vocab_size = 32;
  cfg.ring_size_min = 4;
  cfg.ring_size_max = 8;
  cfg.benign_edge_rate = 1.94;
  cfg.fraud_noise_edge_rate = 0.3;
  cfg.split_train = 0.392;
  cfg.split_validation = 0.328;
  cfg.split_test = 0.280;
  cfg.seed = seed;
  return cfg;
}

inline GeneratorConfig small_preset(uint64_t seed = 1) {
  GeneratorConfig cfg;
  cfg.num_players = 2000;
  cfg.seed = seed;
  return cfg;
}

// Frozen 2K-node benchmark of the acceptance suite; keep identical to
// configs/gen_bench.cfg.
inline GeneratorConfig bench_preset(uint64_t seed = 1) {
  GeneratorConfig cfg;
  cfg.num_players = 2000;
  cfg.fraud_fraction = 0.12;
  cfg.seq_len = 16;
  cfg.vocab_size = 32;
  cfg.ring_size_min = 5;
  cfg.ring_size_max = 9;
  cfg.benign_edge_rate = 1.2;
  cfg.fraud_noise_edge_rate = 0.3;
  cfg.ring_chain_prob = 1.0;
  cfg.ring_extra_edge_prob = 0.7;
  cfg.fraud_focus_prob = 0.95;
  cfg.grinder_fraction = 0.10;
  cfg.grinder_focus_prob = 0.5;
  cfg.mule_fraction = 0.08;
  cfg.seed = seed;
  return cfg;
}

}  // namespace pugnn
