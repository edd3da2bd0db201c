#pragma once

// Flat key=value config files: one assignment per line, '#' comments,
// whitespace-insensitive. Unknown keys are rejected so typos cannot
// silently fall back to defaults. Environment variables are never read.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "pugnn/dataset.hpp"
#include "pugnn/training.hpp"

namespace pugnn {

inline std::map<std::string, std::string> parse_key_values(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (blank) continue;
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key or value");
    if (kv.count(key))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
    kv[key] = value;
  }
  return kv;
}

namespace config_detail {

class Reader {
 public:
  Reader(std::map<std::string, std::string> kv, std::string path)
      : kv_(std::move(kv)), path_(std::move(path)) {}

  bool has(const std::string& key) {
    used_.insert(key);
    return kv_.count(key) > 0;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    std::istringstream ss(it->second);
    T v;
    if constexpr (std::is_same_v<T, bool>) {
      std::string s = it->second;
      if (s == "true" || s == "1")
        v = true;
      else if (s == "false" || s == "0")
        v = false;
      else
        throw std::runtime_error(path_ + ": key " + key + " expects true/false");
    } else {
      if (!(ss >> v) || !(ss >> std::ws).eof())
        throw std::runtime_error(path_ + ": cannot parse value for key " + key);
    }
    out = v;
  }

  void get(const std::string& key, std::string& out) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it != kv_.end()) out = it->second;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) throw std::runtime_error(path_ + ": unknown config key " + k);
  }

 private:
  std::map<std::string, std::string> kv_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace config_detail

inline GeneratorConfig load_generator_config(const std::string& path) {
  config_detail::Reader r(parse_key_values(path), path);
  GeneratorConfig c;
  r.get("num_players", c.num_players);
  r.get("fraud_fraction", c.fraud_fraction);
  r.get("seq_len", c.seq_len);
  r.get("vocab_size", c.vocab_size);
  r.get("edge_feature_dim", c.edge_feature_dim);
  r.get("ring_size_min", c.ring_size_min);
  r.get("ring_size_max", c.ring_size_max);
  r.get("benign_edge_rate", c.benign_edge_rate);
  r.get("fraud_noise_edge_rate", c.fraud_noise_edge_rate);
  r.get("ring_chain_prob", c.ring_chain_prob);
  r.get("ring_extra_edge_prob", c.ring_extra_edge_prob);
  r.get("fraud_focus_prob", c.fraud_focus_prob);
  r.get("grinder_fraction", c.grinder_fraction);
  r.get("grinder_focus_prob", c.grinder_focus_prob);
  r.get("mule_fraction", c.mule_fraction);
  r.get("split_train", c.split_train);
  r.get("split_validation", c.split_validation);
  r.get("split_test", c.split_test);
  std::string mode = "random";
  r.get("split_mode", mode);
  if (mode != "random" && mode != "chronological")
    throw std::runtime_error(path + ": split_mode must be random or chronological");
  c.split_mode = mode == "random" ? SplitMode::kRandom : SplitMode::kChronological;
  r.get("labeled_positive_fraction", c.labeled_positive_fraction);
  r.get("seed", c.seed);
  r.reject_unknown();
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  config_detail::Reader r(parse_key_values(path), path);
  TrainConfig c;
  r.get("embed_dim", c.embed_dim);
  r.get("attention_blocks", c.attention_blocks);
  r.get("gnn_layers", c.gnn_layers);
  r.get("gnn_hidden", c.gnn_hidden);
  r.get("dropout", c.dropout);
  r.get("learning_rate", c.learning_rate);
  r.get("max_epochs", c.max_epochs);
  r.get("patience", c.patience);
  r.get("num_runs", c.num_runs);
  std::string loss = loss_mode_name(c.loss_mode);
  r.get("loss_mode", loss);
  c.loss_mode = loss_mode_from_name(loss);
  r.get("smote_enabled", c.smote_enabled);
  r.get("smote_k", c.smote_k);
  r.get("smote_target_ratio", c.smote_target_ratio);
  r.get("link_threshold", c.link_threshold);
  r.get("link_max_degree", c.link_max_degree);
  r.get("link_epochs", c.link_epochs);
  r.get("pi_p_override", c.pi_p_override);
  r.get("seed", c.seed);
  r.get("qkv_projections", c.qkv_projections);
  r.get("batch_norm", c.batch_norm);
  r.get("aggregate_neighbor", c.aggregate_neighbor);
  std::string corr = "prior_weighted";
  r.get("nnpu_correction", corr);
  if (corr == "prior_weighted")
    c.nnpu_correction = NnpuCorrectionMode::kPriorWeighted;
  else if (corr == "literal")
    c.nnpu_correction = NnpuCorrectionMode::kLiteral;
  else
    throw std::runtime_error(path + ": nnpu_correction must be prior_weighted or literal");
  std::string grad = "clamp";
  r.get("nnpu_gradient_mode", grad);
  if (grad == "clamp")
    c.nnpu_gradient = NnpuGradientMode::kClamp;
  else if (grad == "negate_descend")
    c.nnpu_gradient = NnpuGradientMode::kNegateDescend;
  else
    throw std::runtime_error(path + ": nnpu_gradient_mode must be clamp or negate_descend");
  r.reject_unknown();
  c.validate();
  return c;
}

// Snapshot of the resolved training configuration, used by run manifests
// and the ablation config-diff checks.
inline std::map<std::string, std::string> train_config_snapshot(const TrainConfig& c) {
  std::map<std::string, std::string> m;
  auto put = [&](const std::string& k, auto v) {
    std::ostringstream ss;
    ss << v;
    m[k] = ss.str();
  };
  put("embed_dim", c.embed_dim);
  put("attention_blocks", c.attention_blocks);
  put("gnn_layers", c.gnn_layers);
  put("gnn_hidden", c.gnn_hidden);
  put("dropout", c.dropout);
  put("learning_rate", c.learning_rate);
  put("max_epochs", c.max_epochs);
  put("patience", c.patience);
  put("num_runs", c.num_runs);
  put("loss_mode", loss_mode_name(c.loss_mode));
  put("smote_enabled", c.smote_enabled ? "true" : "false");
  put("smote_k", c.smote_k);
  put("smote_target_ratio", c.smote_target_ratio);
  put("link_threshold", c.link_threshold);
  put("link_max_degree", c.link_max_degree);
  put("link_epochs", c.link_epochs);
  put("pi_p_override", c.pi_p_override);
  put("seed", c.seed);
  put("qkv_projections", c.qkv_projections ? "true" : "false");
  put("batch_norm", c.batch_norm ? "true" : "false");
  put("aggregate_neighbor", c.aggregate_neighbor ? "true" : "false");
  put("nnpu_correction",
      c.nnpu_correction == NnpuCorrectionMode::kPriorWeighted ? "prior_weighted" : "literal");
  put("nnpu_gradient_mode", c.nnpu_gradient == NnpuGradientMode::kClamp ? "clamp" : "negate_descend");
  return m;
}

}  // namespace pugnn
