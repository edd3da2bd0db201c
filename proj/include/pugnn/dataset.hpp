#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pugnn {

enum class Split { kTrain, kValidation, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split name: " + s);
}

enum class SplitMode { kRandom, kChronological };

// One player: an activity-log sequence of event-type ids (0 is the reserved
// pad id; sequences are left-padded so the most recent events sit at the
// end) and the generator's ground-truth label.
struct PlayerRecord {
  int player_id = 0;
  std::vector<int> activity_sequence;  // length n, ids in [0, vocab_size)
  int true_label = -1;                 // fraud = +1, benign = -1

  bool operator==(const PlayerRecord&) const = default;
};

// One directed token transfer with F_e real-valued features. By convention
// feature 0 is the token amount (>= 0) and feature 1, when present, is a
// normalized timestamp in [0, 1].
struct TransactionEdge {
  int src = 0;
  int dst = 0;
  std::vector<double> features;

  bool operator==(const TransactionEdge&) const = default;
};

struct GeneratorConfig {
  int num_players = 2000;
  double fraud_fraction = 0.1;
  int seq_len = 16;     // n
  int vocab_size = 32;  // includes the reserved pad id 0
  int edge_feature_dim = 2;
  int ring_size_min = 4;
  int ring_size_max = 8;
  double benign_edge_rate = 1.5;   // mean outgoing edges per benign player
  double fraud_noise_edge_rate = 0.3;  // extra non-ring edges per fraud player
  double ring_chain_prob = 0.7;    // member -> next-member chain edges
  double ring_extra_edge_prob = 0.3;  // member -> random other-member transfers
  double fraud_focus_prob = 0.85;  // mass on the mining/purchase event subset
  double grinder_fraction = 0.15;  // benign players that mimic the fraud focus
  double grinder_focus_prob = 0.70;
  double mule_fraction = 0.15;     // ring members with benign-looking sequences
  double split_train = 0.6;
  double split_validation = 0.2;
  double split_test = 0.2;
  SplitMode split_mode = SplitMode::kRandom;
  double labeled_positive_fraction = 0.5;
  uint64_t seed = 1;

  int num_fraud() const {
    return static_cast<int>(fraud_fraction * num_players + 0.5);
  }

  void validate() const {
    if (num_players < 2) throw std::invalid_argument("generator config: num_players must be >= 2");
    if (!(fraud_fraction > 0.0 && fraud_fraction < 1.0))
      throw std::invalid_argument("generator config: fraud_fraction must lie in (0,1)");
    if (seq_len < 1) throw std::invalid_argument("generator config: seq_len must be >= 1");
    if (vocab_size < 4) throw std::invalid_argument("generator config: vocab_size must be >= 4");
    if (edge_feature_dim < 1) throw std::invalid_argument("generator config: edge_feature_dim must be >= 1");
    if (ring_size_min < 2 || ring_size_max < ring_size_min)
      throw std::invalid_argument("generator config: ring sizes must satisfy 2 <= min <= max");
    if (num_fraud() < 2 * ring_size_max)
      throw std::invalid_argument(
          "generator config: fraud_fraction * num_players must be >= 2 * ring_size_max");
    double s = split_train + split_validation + split_test;
    if (std::abs(s - 1.0) > 1e-9)
      throw std::invalid_argument("generator config: split fractions must sum to 1");
    if (split_train <= 0.0 || split_validation <= 0.0 || split_test <= 0.0)
      throw std::invalid_argument("generator config: split fractions must be positive");
    if (!(labeled_positive_fraction > 0.0 && labeled_positive_fraction <= 1.0))
      throw std::invalid_argument("generator config: labeled_positive_fraction must lie in (0,1]");
    if (benign_edge_rate < 0.0 || fraud_noise_edge_rate < 0.0)
      throw std::invalid_argument("generator config: edge rates must be nonnegative");
  }
};

// A full dataset: players, transaction graph, split assignment, PU train
// labels (+1 labeled positive / 0 unlabeled, defined exactly on the train
// split) and the ground-truth class prior of the train split.
struct Dataset {
  std::vector<PlayerRecord> players;  // player_id == index
  std::vector<TransactionEdge> edges;
  std::vector<Split> split_assignment;  // per player
  std::map<int, int> train_label;       // player_id -> {+1, 0}; train players only
  GeneratorConfig generator_config;
  uint64_t seed = 0;
  double pi_p = 0.0;  // ground-truth positive prior on the train split

  bool operator==(const Dataset& o) const {
    return players == o.players && edges == o.edges && split_assignment == o.split_assignment &&
           train_label == o.train_label && seed == o.seed && pi_p == o.pi_p;
  }

  int num_players() const { return static_cast<int>(players.size()); }

  std::vector<int> players_in(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < num_players(); ++i)
      if (split_assignment[i] == s) out.push_back(i);
    return out;
  }

  void validate() const {
    if (players.empty()) throw std::runtime_error("empty dataset");
    for (int i = 0; i < num_players(); ++i) {
      if (players[i].player_id != i) throw std::runtime_error("player ids must be dense 0..N-1");
      for (int ev : players[i].activity_sequence)
        if (ev < 0 || ev >= generator_config.vocab_size)
          throw std::runtime_error("event id out of vocabulary range");
    }
    for (const auto& e : edges) {
      if (e.src < 0 || e.src >= num_players() || e.dst < 0 || e.dst >= num_players())
        throw std::runtime_error("edge references unknown player");
      if (static_cast<int>(e.features.size()) != generator_config.edge_feature_dim)
        throw std::runtime_error("edge feature width mismatch");
    }
    if (static_cast<int>(split_assignment.size()) != num_players())
      throw std::runtime_error("split assignment size mismatch");
    for (const auto& [pid, lab] : train_label) {
      if (pid < 0 || pid >= num_players() || split_assignment[pid] != Split::kTrain)
        throw std::runtime_error("train label on non-train player");
      if (lab != 1 && lab != 0) throw std::runtime_error("train label must be +1 or 0");
      if (lab == 1 && players[pid].true_label != 1)
        throw std::runtime_error("labeled positive is not a fraud player");
    }
  }
};

}  // namespace pugnn
