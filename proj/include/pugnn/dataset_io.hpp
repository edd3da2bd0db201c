#pragma once

// On-disk dataset schema, stable across versions:
//   <dir>/players.txt  one record per line:
//                        id true_label split train_label ev_0 ... ev_{n-1}
//                      true_label in {+1,-1}; split in {train,validation,test};
//                      train_label in {+1,0} for train players, "-" otherwise.
//   <dir>/edges.csv    header "src,dst,f0,...,f{F_e-1}" then one edge per line.
//   <dir>/meta.json    sidecar with format version, seed, pi_p and the full
//                      generator config snapshot.
// Doubles are written with %.17g so save -> load round-trips exactly and
// generation is byte-identical for identical (config, seed).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pugnn/dataset.hpp"

namespace pugnn {

namespace io_detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] inline void parse_fail(const std::string& file, int line, const std::string& what) {
  throw std::runtime_error(file + ":" + std::to_string(line) + ": parse error: " + what);
}

}  // namespace io_detail

inline nlohmann::json generator_config_to_json(const GeneratorConfig& c) {
  nlohmann::json j;
  j["num_players"] = c.num_players;
  j["fraud_fraction"] = c.fraud_fraction;
  j["seq_len"] = c.seq_len;
  j["vocab_size"] = c.vocab_size;
  j["edge_feature_dim"] = c.edge_feature_dim;
  j["ring_size_min"] = c.ring_size_min;
  j["ring_size_max"] = c.ring_size_max;
  j["benign_edge_rate"] = c.benign_edge_rate;
  j["fraud_noise_edge_rate"] = c.fraud_noise_edge_rate;
  j["ring_chain_prob"] = c.ring_chain_prob;
  j["ring_extra_edge_prob"] = c.ring_extra_edge_prob;
  j["fraud_focus_prob"] = c.fraud_focus_prob;
  j["grinder_fraction"] = c.grinder_fraction;
  j["grinder_focus_prob"] = c.grinder_focus_prob;
  j["mule_fraction"] = c.mule_fraction;
  j["split_train"] = c.split_train;
  j["split_validation"] = c.split_validation;
  j["split_test"] = c.split_test;
  j["split_mode"] = c.split_mode == SplitMode::kRandom ? "random" : "chronological";
  j["labeled_positive_fraction"] = c.labeled_positive_fraction;
  j["seed"] = c.seed;
  return j;
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.num_players = j.at("num_players").get<int>();
  c.fraud_fraction = j.at("fraud_fraction").get<double>();
  c.seq_len = j.at("seq_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.edge_feature_dim = j.at("edge_feature_dim").get<int>();
  c.ring_size_min = j.at("ring_size_min").get<int>();
  c.ring_size_max = j.at("ring_size_max").get<int>();
  c.benign_edge_rate = j.at("benign_edge_rate").get<double>();
  c.fraud_noise_edge_rate = j.at("fraud_noise_edge_rate").get<double>();
  c.ring_chain_prob = j.at("ring_chain_prob").get<double>();
  c.ring_extra_edge_prob = j.at("ring_extra_edge_prob").get<double>();
  c.fraud_focus_prob = j.at("fraud_focus_prob").get<double>();
  c.grinder_fraction = j.at("grinder_fraction").get<double>();
  c.grinder_focus_prob = j.at("grinder_focus_prob").get<double>();
  c.mule_fraction = j.at("mule_fraction").get<double>();
  c.split_train = j.at("split_train").get<double>();
  c.split_validation = j.at("split_validation").get<double>();
  c.split_test = j.at("split_test").get<double>();
  c.split_mode = j.at("split_mode").get<std::string>() == "chronological" ? SplitMode::kChronological
                                                                          : SplitMode::kRandom;
  c.labeled_positive_fraction = j.at("labeled_positive_fraction").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  ds.validate();
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream f(dir + "/players.txt");
    if (!f) throw std::runtime_error("cannot write " + dir + "/players.txt");
    for (const auto& p : ds.players) {
      f << p.player_id << ' ' << (p.true_label > 0 ? "+1" : "-1") << ' '
        << split_name(ds.split_assignment[p.player_id]) << ' ';
      auto it = ds.train_label.find(p.player_id);
      if (it == ds.train_label.end())
        f << '-';
      else
        f << (it->second == 1 ? "+1" : "0");
      for (int ev : p.activity_sequence) f << ' ' << ev;
      f << '\n';
    }
  }
  {
    std::ofstream f(dir + "/edges.csv");
    if (!f) throw std::runtime_error("cannot write " + dir + "/edges.csv");
    f << "src,dst";
    for (int k = 0; k < ds.generator_config.edge_feature_dim; ++k) f << ",f" << k;
    f << '\n';
    for (const auto& e : ds.edges) {
      f << e.src << ',' << e.dst;
      for (double v : e.features) f << ',' << io_detail::fmt_double(v);
      f << '\n';
    }
  }
  {
    nlohmann::json meta;
    meta["format_version"] = 1;
    meta["seed"] = ds.seed;
    meta["pi_p"] = ds.pi_p;
    meta["generator_config"] = generator_config_to_json(ds.generator_config);
    std::ofstream f(dir + "/meta.json");
    if (!f) throw std::runtime_error("cannot write " + dir + "/meta.json");
    f << meta.dump(2) << '\n';
  }
}

inline Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  const std::string meta_path = dir + "/meta.json";
  {
    std::ifstream f(meta_path);
    if (!f) throw std::runtime_error("cannot read " + meta_path);
    nlohmann::json meta;
    try {
      f >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(meta_path + ": parse error: " + e.what());
    }
    if (meta.at("format_version").get<int>() != 1)
      throw std::runtime_error(meta_path + ": unsupported format version");
    ds.seed = meta.at("seed").get<uint64_t>();
    ds.pi_p = meta.at("pi_p").get<double>();
    ds.generator_config = generator_config_from_json(meta.at("generator_config"));
  }

  const std::string players_path = dir + "/players.txt";
  {
    std::ifstream f(players_path);
    if (!f) throw std::runtime_error("cannot read " + players_path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      PlayerRecord p;
      std::string true_lab, split_str, train_lab;
      if (!(ss >> p.player_id >> true_lab >> split_str >> train_lab))
        io_detail::parse_fail(players_path, lineno, "expected: id label split train_label events...");
      if (true_lab == "+1")
        p.true_label = 1;
      else if (true_lab == "-1")
        p.true_label = -1;
      else
        io_detail::parse_fail(players_path, lineno, "bad true_label '" + true_lab + "'");
      Split sp;
      try {
        sp = split_from_name(split_str);
      } catch (const std::invalid_argument& e) {
        io_detail::parse_fail(players_path, lineno, e.what());
      }
      int ev;
      while (ss >> ev) p.activity_sequence.push_back(ev);
      if (static_cast<int>(p.activity_sequence.size()) != ds.generator_config.seq_len)
        io_detail::parse_fail(players_path, lineno, "sequence length does not match config seq_len");
      if (p.player_id != static_cast<int>(ds.players.size()))
        io_detail::parse_fail(players_path, lineno, "player ids must be dense and ordered");

      ds.players.push_back(std::move(p));
      ds.split_assignment.push_back(sp);
      if (train_lab == "+1")
        ds.train_label[ds.players.back().player_id] = 1;
      else if (train_lab == "0")
        ds.train_label[ds.players.back().player_id] = 0;
      else if (train_lab != "-")
        io_detail::parse_fail(players_path, lineno, "bad train_label '" + train_lab + "'");
    }
    if (ds.players.empty()) throw std::runtime_error(players_path + ": parse error: empty dataset");
  }

  const std::string edges_path = dir + "/edges.csv";
  {
    std::ifstream f(edges_path);
    if (!f) throw std::runtime_error("cannot read " + edges_path);
    std::string line;
    int lineno = 0;
    std::getline(f, line);  // header
    ++lineno;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      TransactionEdge e;
      std::string cell;
      if (!std::getline(ss, cell, ',')) io_detail::parse_fail(edges_path, lineno, "missing src");
      try {
        e.src = std::stoi(cell);
        if (!std::getline(ss, cell, ',')) io_detail::parse_fail(edges_path, lineno, "missing dst");
        e.dst = std::stoi(cell);
        while (std::getline(ss, cell, ',')) e.features.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        io_detail::parse_fail(edges_path, lineno, "bad numeric field '" + cell + "'");
      }
      if (e.src < 0 || e.src >= ds.num_players() || e.dst < 0 || e.dst >= ds.num_players())
        io_detail::parse_fail(edges_path, lineno, "edge references unknown player");
      if (static_cast<int>(e.features.size()) != ds.generator_config.edge_feature_dim)
        io_detail::parse_fail(edges_path, lineno, "edge feature count does not match config");
      ds.edges.push_back(std::move(e));
    }
  }

  ds.validate();
  return ds;
}

}  // namespace pugnn
