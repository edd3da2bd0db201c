#pragma once

// Model checkpoints: a versioned text format of named tensors plus the
// hyperparameters needed to rebuild the architecture. Values are written
// with %.17g so restore is exact. Loading validates the version tag, every
// hyperparameter and every tensor shape, and rejects mismatches.

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "pugnn/training.hpp"

namespace pugnn {

inline constexpr const char* kCheckpointMagic = "PUGNN_CKPT";
inline constexpr int kCheckpointVersion = 1;

inline std::string io_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace ckpt_detail {

using TensorFn = std::function<void(const std::string&, Mat&)>;

inline void visit_batch_norm(BatchNormParams& bn, const std::string& prefix, const TensorFn& fn) {
  fn(prefix + ".gamma", bn.gamma);
  fn(prefix + ".beta", bn.beta);
  fn(prefix + ".running_mean", bn.state.running_mean);
  fn(prefix + ".running_var", bn.state.running_var);
}

inline void visit_stack(GatStackParams& s, const std::string& prefix, const TensorFn& fn) {
  for (size_t l = 0; l < s.layers.size(); ++l) {
    std::string p = prefix + ".layer" + std::to_string(l);
    fn(p + ".theta_att", s.layers[l].theta_att);
    fn(p + ".attn_a", s.layers[l].attn_a);
    fn(p + ".w_msg", s.layers[l].w_msg);
  }
  for (size_t l = 0; l < s.norms.size(); ++l)
    visit_batch_norm(s.norms[l], prefix + ".norm" + std::to_string(l), fn);
}

// Every tensor of the model, stable names, deterministic order.
inline void visit_model(PuGnnModel& m, const TensorFn& fn) {
  fn("encoder.embedding", m.encoder.embedding);
  for (size_t b = 0; b < m.encoder.blocks.size(); ++b) {
    std::string p = "encoder.block" + std::to_string(b);
    fn(p + ".wq", m.encoder.blocks[b].wq);
    fn(p + ".wk", m.encoder.blocks[b].wk);
    fn(p + ".wv", m.encoder.blocks[b].wv);
    fn(p + ".fc_w", m.encoder.blocks[b].fc_w);
    fn(p + ".fc_b", m.encoder.blocks[b].fc_b);
  }
  for (size_t n = 0; n < m.encoder.norms.size(); ++n)
    visit_batch_norm(m.encoder.norms[n], "encoder.norm" + std::to_string(n), fn);
  visit_stack(m.graph_model.fwd, "fwd", fn);
  visit_stack(m.graph_model.rev, "rev", fn);
  fn("head.w", m.graph_model.head_w);
  fn("head.b", m.graph_model.head_b);
  fn("link.weight", m.link_gen.weight);
}

}  // namespace ckpt_detail

inline void save_checkpoint(const TrainedModel& tm, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  const TrainConfig& c = tm.config;
  f << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  f << "embed_dim " << c.embed_dim << '\n';
  f << "attention_blocks " << c.attention_blocks << '\n';
  f << "gnn_layers " << c.gnn_layers << '\n';
  f << "gnn_hidden " << c.gnn_hidden << '\n';
  f << "qkv_projections " << (c.qkv_projections ? 1 : 0) << '\n';
  f << "batch_norm " << (c.batch_norm ? 1 : 0) << '\n';
  f << "aggregate_neighbor " << (c.aggregate_neighbor ? 1 : 0) << '\n';
  f << "vocab_size " << tm.model.encoder.cfg.vocab_size << '\n';
  f << "edge_feature_dim " << tm.model.graph_model.cfg.edge_feature_dim << '\n';
  f << "link_threshold " << io_fmt(tm.model.link_gen.threshold) << '\n';
  f << "pi_p " << io_fmt(tm.pi_p) << '\n';
  f << "best_epoch " << tm.best_epoch << '\n';
  f << "best_val_f1 " << io_fmt(tm.best_val_f1) << '\n';
  auto& model = const_cast<PuGnnModel&>(tm.model);
  ckpt_detail::visit_model(model, [&](const std::string& name, Mat& m) {
    f << "tensor " << name << ' ' << m.rows << ' ' << m.cols;
    for (double v : m.a) f << ' ' << io_fmt(v);
    f << '\n';
  });
  f << "end\n";
}

inline TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint " + path);
  std::string magic;
  int version = 0;
  f >> magic >> version;
  if (magic != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  std::map<std::string, std::string> scalars;
  TrainedModel tm;
  std::string key;
  // scalar header until the first tensor line
  while (f >> key) {
    if (key == "tensor" || key == "end") break;
    std::string value;
    f >> value;
    scalars[key] = value;
  }
  auto need = [&](const std::string& k) {
    auto it = scalars.find(k);
    if (it == scalars.end()) throw std::runtime_error("checkpoint: missing field " + k);
    return it->second;
  };
  TrainConfig& c = tm.config;
  c.embed_dim = std::stoi(need("embed_dim"));
  c.attention_blocks = std::stoi(need("attention_blocks"));
  c.gnn_layers = std::stoi(need("gnn_layers"));
  c.gnn_hidden = std::stoi(need("gnn_hidden"));
  c.qkv_projections = need("qkv_projections") == "1";
  c.batch_norm = need("batch_norm") == "1";
  c.aggregate_neighbor = need("aggregate_neighbor") == "1";
  c.link_threshold = std::stod(need("link_threshold"));
  tm.pi_p = std::stod(need("pi_p"));
  tm.best_epoch = std::stoi(need("best_epoch"));
  tm.best_val_f1 = std::stod(need("best_val_f1"));
  int vocab_size = std::stoi(need("vocab_size"));
  int edge_feature_dim = std::stoi(need("edge_feature_dim"));

  Rng rng(0);
  tm.model.init(c, vocab_size, edge_feature_dim, rng);

  // read tensors; the stream already consumed the word "tensor" or "end"
  std::set<std::string> filled;
  std::map<std::string, Mat*> slots;
  ckpt_detail::visit_model(tm.model, [&](const std::string& name, Mat& m) { slots[name] = &m; });
  while (key == "tensor") {
    std::string name;
    int rows = 0, cols = 0;
    if (!(f >> name >> rows >> cols)) throw std::runtime_error("checkpoint: truncated tensor header");
    auto it = slots.find(name);
    if (it == slots.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
    Mat& m = *it->second;
    if (m.rows != rows || m.cols != cols)
      throw std::runtime_error("checkpoint: tensor " + name + " shape mismatch (hyperparameters differ)");
    for (double& v : m.a)
      if (!(f >> v)) throw std::runtime_error("checkpoint: truncated tensor " + name);
    filled.insert(name);
    if (!(f >> key)) throw std::runtime_error("checkpoint: missing end marker");
  }
  if (key != "end") throw std::runtime_error("checkpoint: missing end marker");
  if (filled.size() != slots.size())
    throw std::runtime_error("checkpoint: incomplete tensor set (hyperparameters differ)");
  return tm;
}

}  // namespace pugnn
