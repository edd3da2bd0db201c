#include <doctest.h>

#include <cmath>

#include "fd_util.hpp"
#include "pugnn/behavior_encoder.hpp"

using namespace pugnn;
using fdtest::fd_check;
using fdtest::random_mat;

namespace {

EncoderParams small_encoder(int vocab, int d, int blocks, uint64_t seed = 9,
                            bool batch_norm = true) {
  EncoderParams p;
  p.cfg.vocab_size = vocab;
  p.cfg.d = d;
  p.cfg.blocks = blocks;
  p.cfg.dropout = 0.0;
  p.cfg.batch_norm = batch_norm;
  Rng rng(seed);
  p.init(rng);
  return p;
}

AttentionBlockParams identity_block(int d) {
  AttentionBlockParams b;
  b.wq = b.wk = b.wv = b.fc_w = Mat(d, d);
  for (int i = 0; i < d; ++i) b.fc_w(i, i) = b.wq(i, i) = b.wk(i, i) = b.wv(i, i) = 1.0;
  b.fc_b = Mat(1, d, 0.0);
  return b;
}

}  // namespace

TEST_CASE("embed: lookup identity, pad row, repeated ids") {
  Mat table(5, 3);
  for (int i = 1; i < 5; ++i)
    for (int j = 0; j < 3; ++j) table(i, j) = 10.0 * i + j;

  Mat one = embed({3}, table);
  CHECK(one.rows == 1);
  for (int j = 0; j < 3; ++j) CHECK(one(0, j) == table(3, j));

  Mat pads = embed({0, 0, 0}, table);
  for (double v : pads.a) CHECK(v == 0.0);

  Mat twice = embed({2, 2}, table);
  for (int j = 0; j < 3; ++j) CHECK(twice(0, j) == twice(1, j));

  CHECK_THROWS_AS(embed({7}, table), std::out_of_range);
  CHECK_THROWS_AS(embed({-1}, table), std::out_of_range);
}

TEST_CASE("attention_block: single token with identity maps returns its own value row") {
  AttentionBlockParams b = identity_block(3);
  Mat s(1, 3);
  s.a = {0.3, -1.2, 2.0};
  Mat h = attention_block(s, b);
  for (int j = 0; j < 3; ++j) CHECK(h(0, j) == doctest::Approx(s(0, j)).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(attention_block(Mat(0, 3), b), doctest::Contains("empty"),
                       std::invalid_argument);
}

TEST_CASE("attention_block: identical rows collapse to the shared value row") {
  AttentionBlockParams b = identity_block(2);
  Mat s(3, 2);
  for (int i = 0; i < 3; ++i) {
    s(i, 0) = 0.7;
    s(i, 1) = -0.4;
  }
  Mat h = attention_block(s, b);
  for (int i = 0; i < 3; ++i) {
    CHECK(h(i, 0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(h(i, 1) == doctest::Approx(-0.4).epsilon(1e-12));
  }
}

TEST_CASE("attention_block: n=2 d=1 matches the hand-computed scalar softmax") {
  AttentionBlockParams b = identity_block(1);
  Mat s(2, 1);
  s.a = {1.0, 2.0};
  Mat h = attention_block(s, b);
  // oracle: row i weights = softmax([s_i*1, s_i*2] / sqrt(1))
  auto row = [&](double q) {
    double l1 = q * 1.0, l2 = q * 2.0;
    double m = std::max(l1, l2);
    double e1 = std::exp(l1 - m), e2 = std::exp(l2 - m);
    return (e1 * 1.0 + e2 * 2.0) / (e1 + e2);
  };
  CHECK(h(0, 0) == doctest::Approx(row(1.0)).epsilon(1e-12));
  CHECK(h(1, 0) == doctest::Approx(row(2.0)).epsilon(1e-12));
}

TEST_CASE("attention weights are nonnegative and rows sum to 1") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    int n = rng.uniform_int(2, 6), d = rng.uniform_int(1, 4);
    Mat q = random_mat(n, d, rng), k = random_mat(n, d, rng), v = random_mat(n, d, rng);
    std::vector<uint8_t> valid(n, 1);
    if (n > 2) valid[rng.uniform_int(n)] = 0;
    bool any_valid = false;
    for (auto f : valid) any_valid |= f;
    if (!any_valid) valid[0] = 1;

    ad::Tape t;
    std::vector<Mat> attn;
    t.seq_attention(t.leaf(q), t.leaf(k), t.leaf(v), n, valid, &attn);
    REQUIRE(attn.size() == 1);
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        CHECK(attn[0](i, j) >= 0.0);
        if (!valid[j]) CHECK(attn[0](i, j) == 0.0);  // pad keys get zero weight
        sum += attn[0](i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("encode_player: one valid row gives x = h || h") {
  EncoderParams p = small_encoder(6, 3, 1);
  std::vector<double> x = encode_player({0, 0, 4}, p);
  REQUIRE(x.size() == 6);
  for (int j = 0; j < 3; ++j) CHECK(x[j] == doctest::Approx(x[3 + j]).epsilon(1e-12));
}

TEST_CASE("pooling matches the hand-computed mean/max example") {
  // H rows [1,3] and [5,-1]: mean=[3,1], max=[5,3], x=[3,1,5,3]
  Mat h(2, 2);
  h(0, 0) = 1; h(0, 1) = 3;
  h(1, 0) = 5; h(1, 1) = -1;
  ad::Tape t;
  ad::Var out = t.pool_mean_max(t.leaf(h), 2, {1, 1});
  const Mat& x = t.val(out);
  CHECK(x(0, 0) == doctest::Approx(3.0));
  CHECK(x(0, 1) == doctest::Approx(1.0));
  CHECK(x(0, 2) == doctest::Approx(5.0));
  CHECK(x(0, 3) == doctest::Approx(3.0));
}

TEST_CASE("encode_player: evaluation is deterministic and all-pad gives the zero vector") {
  EncoderParams p = small_encoder(8, 4, 2);
  p.cfg.dropout = 0.4;  // must not fire in evaluation mode
  std::vector<int> seq = {0, 3, 1, 5};
  CHECK(encode_player(seq, p) == encode_player(seq, p));

  std::vector<double> zero = encode_player({0, 0, 0, 0}, p);
  for (double v : zero) CHECK(v == 0.0);
}

TEST_CASE("default depth and width give F_x = 128") {
  EncoderParams p = small_encoder(10, 64, 5);
  CHECK(p.cfg.feature_dim() == 128);
  CHECK(p.blocks.size() == 5);
  std::vector<double> x = encode_player({1, 2, 3}, p);
  CHECK(x.size() == 128);
}

TEST_CASE("pooled output is invariant to permuting sequence positions") {
  EncoderParams p = small_encoder(12, 4, 3);
  std::vector<int> seq = {0, 5, 2, 9, 2, 7};
  std::vector<int> perm = {2, 9, 7, 0, 5, 2};
  std::vector<double> a = encode_player(seq, p);
  std::vector<double> b = encode_player(perm, p);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
}

TEST_CASE("appending pad tokens never changes x_i") {
  EncoderParams p = small_encoder(12, 3, 2);
  std::vector<double> base = encode_player({4, 7, 1}, p);
  std::vector<double> padded = encode_player({0, 0, 4, 7, 1, 0, 0}, p);
  REQUIRE(base.size() == padded.size());
  for (size_t i = 0; i < base.size(); ++i) CHECK(base[i] == doctest::Approx(padded[i]).epsilon(1e-9));
}

TEST_CASE("exact Eq.-1 mode: no projections leaves Q=K=V=S'") {
  EncoderParams p = small_encoder(6, 2, 1);
  p.cfg.qkv_projections = false;
  // with one block and no projections only the FC sublayer transforms
  AttentionBlockParams ident = identity_block(2);
  p.blocks[0].fc_w = ident.fc_w;
  p.blocks[0].fc_b = ident.fc_b;
  p.blocks[0].wq = p.blocks[0].wk = p.blocks[0].wv = Mat(2, 2);  // must be ignored

  std::vector<double> x = encode_player({3}, p);
  // single token: attention over one score = 1, so x = emb(3) || emb(3)
  for (int j = 0; j < 2; ++j) {
    CHECK(x[j] == doctest::Approx(p.embedding(3, j)).epsilon(1e-12));
    CHECK(x[2 + j] == doctest::Approx(p.embedding(3, j)).epsilon(1e-12));
  }
}

TEST_CASE("gradient through encode_player matches finite differences") {
  // n <= 4, d <= 3, double precision, relative error <= 1e-4
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    EncoderParams p = small_encoder(7, 3, 2, seed);
    std::vector<std::vector<int>> seqs = {{0, 2, 5, 1}, {3, 3, 0, 6}};
    SequenceBatch batch = make_sequence_batch(seqs);

    // pack all trainable tensors as fd inputs
    std::vector<Mat*> masters;
    {
      ad::Tape probe;
      ParamBindings b;
      bind_encoder(probe, p, b);
      for (auto& [v, m] : b.entries) masters.push_back(m);
    }
    std::vector<Mat> inputs;
    for (Mat* m : masters) inputs.push_back(*m);

    auto build = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
      EncoderParams local = p;
      // rebuild the var structure against the supplied leaves
      ParamBindings b;
      EncoderVars ev;
      size_t at = 0;
      ev.embedding = vars[at++];
      for (auto& blk : local.blocks) {
        (void)blk;
        ev.blocks.push_back({vars[at], vars[at + 1], vars[at + 2], vars[at + 3], vars[at + 4]});
        at += 5;
      }
      for (auto& n : local.norms) {
        ev.norms.push_back({vars[at], vars[at + 1], &n.state});
        at += 2;
      }
      Rng dr(0);
      ad::Var x = encoder_forward(tape, ev, local.cfg, batch, /*training=*/true, dr);
      Rng wr(123);
      Mat w1(1, tape.val(x).rows), w2(tape.val(x).cols, 1);
      for (double& v : w1.a) v = wr.uniform(0.3, 1.7);
      for (double& v : w2.a) v = wr.uniform(0.3, 1.7);
      return tape.matmul(tape.matmul(tape.leaf(w1), x), tape.leaf(w2));
    };

    auto rep = fd_check(build, inputs);
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("embedding pad row receives zero gradient") {
  EncoderParams p = small_encoder(6, 2, 1);
  SequenceBatch batch = make_sequence_batch({{0, 3, 4}});
  ad::Tape tape;
  ParamBindings bindings;
  EncoderVars vars = bind_encoder(tape, p, bindings);
  Rng dr(0);
  ad::Var x = encoder_forward(tape, vars, p.cfg, batch, true, dr);
  ad::Var loss = tape.mean_sigmoid_loss(tape.matmul(x, tape.leaf(Mat(4, 1, 1.0))), +1);
  tape.backward(loss);
  Mat& emb_grad = tape.grad(vars.embedding);
  REQUIRE(!emb_grad.empty());
  for (int j = 0; j < 2; ++j) CHECK(emb_grad(0, j) == 0.0);
  // some non-pad row must have gradient
  double total = 0.0;
  for (double v : emb_grad.a) total += std::fabs(v);
  CHECK(total > 0.0);
}
