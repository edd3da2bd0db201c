#pragma once

// Behavior-sequence encoder: embedding lookup, stacked scaled dot-product
// self-attention blocks each closed by a fully connected sublayer, and
// mean/max pooling with concatenation into the node feature x_i of width
// F_x = 2d. Pad positions (event id 0) are masked out of attention keys,
// normalization statistics and pooling, so appending pads never changes x_i.

#include <string>
#include <vector>

#include "pugnn/autodiff.hpp"
#include "pugnn/rng.hpp"
#include "pugnn/tensor.hpp"

namespace pugnn {

// Named handles to every tensor bound on a tape during one forward/backward,
// paired with the master copy the optimizer updates.
struct ParamBindings {
  std::vector<std::pair<ad::Var, Mat*>> entries;

  ad::Var bind(ad::Tape& tape, Mat& master) {
    ad::Var v = tape.leaf(master);
    entries.push_back({v, &master});
    return v;
  }
};

struct EncoderConfig {
  int vocab_size = 0;
  int d = 64;
  int blocks = 5;
  bool qkv_projections = true;  // false = exact Eq.-1 mode with Q = K = V = S'
  double dropout = 0.1;
  bool batch_norm = true;

  int feature_dim() const { return 2 * d; }  // F_x
};

struct BatchNormParams {
  Mat gamma;  // 1 x C
  Mat beta;   // 1 x C
  ad::BatchNormState state;

  void init(int channels) {
    gamma = Mat(1, channels, 1.0);
    beta = Mat(1, channels, 0.0);
    state.init(channels);
  }
};

struct AttentionBlockParams {
  Mat wq, wk, wv;  // d x d projections
  Mat fc_w;        // d x d
  Mat fc_b;        // 1 x d

  void init(int d, Rng& rng) {
    wq = Mat::fan_in_init(d, d, d, rng);
    wk = Mat::fan_in_init(d, d, d, rng);
    wv = Mat::fan_in_init(d, d, d, rng);
    fc_w = Mat::fan_in_init(d, d, d, rng);
    fc_b = Mat(1, d, 0.0);
  }
};

struct EncoderParams {
  EncoderConfig cfg;
  Mat embedding;  // vocab_size x d; row 0 is the pad row, pinned to zero
  std::vector<AttentionBlockParams> blocks;
  std::vector<BatchNormParams> norms;  // between consecutive blocks

  void init(Rng& rng) {
    if (cfg.vocab_size < 1) throw std::invalid_argument("encoder: vocab_size must be set");
    if (cfg.d < 1 || cfg.blocks < 1) throw std::invalid_argument("encoder: d and blocks must be >= 1");
    embedding = Mat::fan_in_init(cfg.vocab_size, cfg.d, cfg.d, rng);
    for (int j = 0; j < cfg.d; ++j) embedding(0, j) = 0.0;
    blocks.assign(cfg.blocks, {});
    for (auto& b : blocks) b.init(cfg.d, rng);
    norms.clear();
    if (cfg.batch_norm)
      for (int k = 0; k + 1 < cfg.blocks; ++k) {
        norms.emplace_back();
        norms.back().init(cfg.d);
      }
  }
};

struct AttentionBlockVars {
  ad::Var wq, wk, wv, fc_w, fc_b;
};

struct BatchNormVars {
  ad::Var gamma, beta;
  ad::BatchNormState* state = nullptr;
};

struct EncoderVars {
  ad::Var embedding;
  std::vector<AttentionBlockVars> blocks;
  std::vector<BatchNormVars> norms;
};

inline BatchNormVars bind_batch_norm(ad::Tape& tape, BatchNormParams& p, ParamBindings& bindings) {
  return {bindings.bind(tape, p.gamma), bindings.bind(tape, p.beta), &p.state};
}

inline EncoderVars bind_encoder(ad::Tape& tape, EncoderParams& p, ParamBindings& bindings) {
  EncoderVars v;
  v.embedding = bindings.bind(tape, p.embedding);
  for (auto& b : p.blocks)
    v.blocks.push_back({bindings.bind(tape, b.wq), bindings.bind(tape, b.wk),
                        bindings.bind(tape, b.wv), bindings.bind(tape, b.fc_w),
                        bindings.bind(tape, b.fc_b)});
  for (auto& n : p.norms) v.norms.push_back(bind_batch_norm(tape, n, bindings));
  return v;
}

// Flattens a batch of sequences into the (S*n) row layout the tape ops use.
struct SequenceBatch {
  std::vector<int> ids;         // S * n event ids
  std::vector<uint8_t> valid;   // 1 where id != 0
  int seq_len = 0;
  int num_seq = 0;
};

inline SequenceBatch make_sequence_batch(const std::vector<std::vector<int>>& seqs) {
  if (seqs.empty()) throw std::invalid_argument("empty sequence batch");
  SequenceBatch b;
  b.num_seq = static_cast<int>(seqs.size());
  b.seq_len = static_cast<int>(seqs[0].size());
  if (b.seq_len == 0) throw std::invalid_argument("empty sequence");
  b.ids.reserve(static_cast<size_t>(b.num_seq) * b.seq_len);
  for (const auto& s : seqs) {
    if (static_cast<int>(s.size()) != b.seq_len)
      throw std::invalid_argument("sequences in a batch must share one length");
    for (int id : s) {
      b.ids.push_back(id);
      b.valid.push_back(id != 0);
    }
  }
  return b;
}

// Full batched encoder forward; output is S x F_x. Gradients flow into every
// bound parameter except embedding row 0 (the gather only touches the rows
// the ids reference and the optimizer pins row 0 anyway).
inline ad::Var encoder_forward(ad::Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                               const SequenceBatch& batch, bool training, Rng& dropout_rng) {
  for (int id : batch.ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::out_of_range("event id " + std::to_string(id) + " outside vocabulary");

  ad::Var h = tape.gather_rows(vars.embedding, batch.ids);
  for (size_t k = 0; k < vars.blocks.size(); ++k) {
    const auto& blk = vars.blocks[k];
    ad::Var q = h, kk = h, vv = h;
    if (cfg.qkv_projections) {
      q = tape.matmul(h, blk.wq);
      kk = tape.matmul(h, blk.wk);
      vv = tape.matmul(h, blk.wv);
    }
    ad::Var attended = tape.seq_attention(q, kk, vv, batch.seq_len, batch.valid);
    h = tape.add_bias(tape.matmul(attended, blk.fc_w), blk.fc_b);
    if (k + 1 < vars.blocks.size()) {
      if (k < vars.norms.size()) {
        const auto& bn = vars.norms[k];
        h = tape.batch_norm(h, bn.gamma, bn.beta, batch.valid, training, bn.state);
      }
      h = tape.dropout(h, cfg.dropout, training, dropout_rng);
    }
  }
  return tape.pool_mean_max(h, batch.seq_len, batch.valid);
}

// ---- single-sequence operations ----------------------------------------

// Embedding lookup: row t of the result is table row sequence[t].
inline Mat embed(const std::vector<int>& sequence, const Mat& table) {
  Mat out(static_cast<int>(sequence.size()), table.cols);
  for (size_t t = 0; t < sequence.size(); ++t) {
    int id = sequence[t];
    if (id < 0 || id >= table.rows)
      throw std::out_of_range("event id " + std::to_string(id) + " outside vocabulary");
    std::copy(table.row_ptr(id), table.row_ptr(id) + table.cols, out.row_ptr(static_cast<int>(t)));
  }
  return out;
}

// One attention block H = FC(softmax(QK^T / sqrt(d)) V) on an n x d input.
// identity_fc skips the fully connected sublayer for Eq.-1 fidelity checks.
inline Mat attention_block(const Mat& s_prime, const AttentionBlockParams& params,
                           bool qkv_projections = true, bool identity_fc = false,
                           const std::vector<uint8_t>* valid = nullptr) {
  if (s_prime.rows == 0) throw std::invalid_argument("empty sequence");
  std::vector<uint8_t> v = valid ? *valid : std::vector<uint8_t>(s_prime.rows, 1);
  ad::Tape tape;
  ad::Var h = tape.leaf(s_prime);
  ad::Var q = h, k = h, vv = h;
  if (qkv_projections) {
    q = tape.matmul(h, tape.leaf(params.wq));
    k = tape.matmul(h, tape.leaf(params.wk));
    vv = tape.matmul(h, tape.leaf(params.wv));
  }
  ad::Var attended = tape.seq_attention(q, k, vv, s_prime.rows, v);
  if (identity_fc) return tape.val(attended);
  ad::Var out = tape.add_bias(tape.matmul(attended, tape.leaf(params.fc_w)), tape.leaf(params.fc_b));
  return tape.val(out);
}

// Encodes one player's sequence to x_i (length F_x) in evaluation mode.
// An all-pad sequence encodes to the zero vector.
inline std::vector<double> encode_player(const std::vector<int>& sequence, EncoderParams& params) {
  ad::Tape tape;
  ParamBindings bindings;
  EncoderVars vars = bind_encoder(tape, params, bindings);
  SequenceBatch batch = make_sequence_batch({sequence});
  Rng rng(0);
  ad::Var x = encoder_forward(tape, vars, params.cfg, batch, /*training=*/false, rng);
  return tape.val(x).a;
}

}  // namespace pugnn
