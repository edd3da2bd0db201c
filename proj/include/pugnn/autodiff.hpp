#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pugnn/rng.hpp"
#include "pugnn/tensor.hpp"

namespace pugnn::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Running statistics for one batch-norm layer. Owned by the model parameters,
// updated as a side effect of training-mode forward passes.
struct BatchNormState {
  Mat running_mean;  // 1 x C
  Mat running_var;   // 1 x C
  void init(int channels) {
    running_mean = Mat(1, channels, 0.0);
    running_var = Mat(1, channels, 1.0);
  }
};

// Reverse-mode tape over matrices. Forward values are computed eagerly when
// an op is recorded; backward() replays the recorded closures in reverse.
class Tape {
 public:
  const Mat& val(Var v) const { return nodes_[v.id].val; }
  Mat& grad(Var v) { return nodes_[v.id].grad; }

  double scalar(Var v) const {
    const Mat& m = nodes_[v.id].val;
    if (m.rows != 1 || m.cols != 1) throw std::invalid_argument("scalar() on non 1x1 var");
    return m.a[0];
  }

  Var leaf(Mat m) { return push(std::move(m), {}, nullptr); }

  void backward(Var out) {
    const Mat& o = nodes_[out.id].val;
    if (o.rows != 1 || o.cols != 1) throw std::invalid_argument("backward() root must be scalar");
    nodes_[out.id].grad = Mat(1, 1, 1.0);
    for (int i = out.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) {
        current_ = Var{i};
        n.backward(*this);
      }
    }
    current_ = Var{-1};
  }

  // ---- ops -------------------------------------------------------------

  Var matmul(Var A, Var B) {
    Mat out = pugnn::matmul(val(A), val(B));
    return push(std::move(out), {A, B}, [A, B](Tape& t) {
      Var self = t.current_;
      const Mat& g = t.grad(self);
      t.accum(A, matmul_nt(g, t.val(B)));
      t.accum(B, matmul_tn(t.val(A), g));
    });
  }

  Var add(Var A, Var B) {
    check_shape(val(A).same_shape(val(B)), "ad::add");
    Mat out = val(A);
    add_inplace(out, val(B));
    return push(std::move(out), {A, B}, [A, B](Tape& t) {
      const Mat& g = t.grad(t.current_);
      t.accum(A, g);
      t.accum(B, g);
    });
  }

  Var sub(Var A, Var B) { return add(A, scale(B, -1.0)); }

  Var scale(Var A, double c) {
    Mat out = val(A);
    for (double& v : out.a) v *= c;
    return push(std::move(out), {A}, [A, c](Tape& t) {
      Mat g = t.grad(t.current_);
      for (double& v : g.a) v *= c;
      t.accum(A, g);
    });
  }

  // Broadcast-add a 1 x C bias row to every row of A.
  Var add_bias(Var A, Var b) {
    const Mat& av = val(A);
    const Mat& bv = val(b);
    check_shape(bv.rows == 1 && bv.cols == av.cols, "ad::add_bias");
    Mat out = av;
    for (int i = 0; i < out.rows; ++i) {
      double* r = out.row_ptr(i);
      for (int j = 0; j < out.cols; ++j) r[j] += bv.a[j];
    }
    return push(std::move(out), {A, b}, [A, b](Tape& t) {
      const Mat& g = t.grad(t.current_);
      t.accum(A, g);
      Mat gb(1, g.cols);
      for (int i = 0; i < g.rows; ++i) {
        const double* r = g.row_ptr(i);
        for (int j = 0; j < g.cols; ++j) gb.a[j] += r[j];
      }
      t.accum(b, gb);
    });
  }

  Var leaky_relu(Var A, double slope) {
    Mat out = val(A);
    for (double& v : out.a) v = v > 0.0 ? v : slope * v;
    return push(std::move(out), {A}, [A, slope](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& x = t.val(A);
      Mat gx(x.rows, x.cols);
      for (size_t i = 0; i < x.a.size(); ++i) gx.a[i] = g.a[i] * (x.a[i] > 0.0 ? 1.0 : slope);
      t.accum(A, gx);
    });
  }

  Var relu(Var A) { return leaky_relu(A, 0.0); }

  Var tanh_act(Var A) {
    Mat out = val(A);
    for (double& v : out.a) v = std::tanh(v);
    return push(std::move(out), {A}, [A](Tape& t) {
      Var self = t.current_;
      const Mat& g = t.grad(self);
      const Mat& y = t.val(self);
      Mat gx(y.rows, y.cols);
      for (size_t i = 0; i < y.a.size(); ++i) gx.a[i] = g.a[i] * (1.0 - y.a[i] * y.a[i]);
      t.accum(A, gx);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int rows = val(parts[0]).rows;
    int cols = 0;
    for (Var p : parts) {
      check_shape(val(p).rows == rows, "ad::concat_cols rows");
      cols += val(p).cols;
    }
    Mat out(rows, cols);
    int off = 0;
    for (Var p : parts) {
      const Mat& m = val(p);
      for (int i = 0; i < rows; ++i)
        std::copy(m.row_ptr(i), m.row_ptr(i) + m.cols, out.row_ptr(i) + off);
      off += m.cols;
    }
    return push(std::move(out), parts, [parts](Tape& t) {
      const Mat& g = t.grad(t.current_);
      int off2 = 0;
      for (Var p : parts) {
        const Mat& m = t.val(p);
        Mat gp(m.rows, m.cols);
        for (int i = 0; i < m.rows; ++i)
          std::copy(g.row_ptr(i) + off2, g.row_ptr(i) + off2 + m.cols, gp.row_ptr(i));
        off2 += m.cols;
        t.accum(p, gp);
      }
    });
  }

  // Stack rows of A on top of rows of B.
  Var vstack(Var A, Var B) {
    const Mat& av = val(A);
    const Mat& bv = val(B);
    check_shape(av.cols == bv.cols, "ad::vstack");
    Mat out(av.rows + bv.rows, av.cols);
    std::copy(av.a.begin(), av.a.end(), out.a.begin());
    std::copy(bv.a.begin(), bv.a.end(), out.a.begin() + av.a.size());
    return push(std::move(out), {A, B}, [A, B](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& av2 = t.val(A);
      const Mat& bv2 = t.val(B);
      Mat ga(av2.rows, av2.cols), gb(bv2.rows, bv2.cols);
      std::copy(g.a.begin(), g.a.begin() + ga.a.size(), ga.a.begin());
      std::copy(g.a.begin() + ga.a.size(), g.a.end(), gb.a.begin());
      t.accum(A, ga);
      t.accum(B, gb);
    });
  }

  // out.row(e) = X.row(idx[e]); duplicate indices accumulate in backward.
  Var gather_rows(Var X, std::vector<int> idx) {
    const Mat& x = val(X);
    for (int i : idx)
      if (i < 0 || i >= x.rows) throw std::out_of_range("gather_rows: index out of range");
    Mat out(static_cast<int>(idx.size()), x.cols);
    for (size_t e = 0; e < idx.size(); ++e)
      std::copy(x.row_ptr(idx[e]), x.row_ptr(idx[e]) + x.cols, out.row_ptr(static_cast<int>(e)));
    return push(std::move(out), {X}, [X, idx = std::move(idx)](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& x2 = t.val(X);
      Mat gx(x2.rows, x2.cols);
      for (size_t e = 0; e < idx.size(); ++e) {
        const double* gr = g.row_ptr(static_cast<int>(e));
        double* xr = gx.row_ptr(idx[e]);
        for (int j = 0; j < gx.cols; ++j) xr[j] += gr[j];
      }
      t.accum(X, gx);
    });
  }

  // out.row(i) = c[i] * X.row(i)
  Var row_scale(Var X, std::vector<double> c) {
    const Mat& x = val(X);
    check_shape(static_cast<int>(c.size()) == x.rows, "ad::row_scale");
    Mat out = x;
    for (int i = 0; i < out.rows; ++i) {
      double* r = out.row_ptr(i);
      for (int j = 0; j < out.cols; ++j) r[j] *= c[i];
    }
    return push(std::move(out), {X}, [X, c = std::move(c)](Tape& t) {
      const Mat& g = t.grad(t.current_);
      Mat gx = g;
      for (int i = 0; i < gx.rows; ++i) {
        double* r = gx.row_ptr(i);
        for (int j = 0; j < gx.cols; ++j) r[j] *= c[i];
      }
      t.accum(X, gx);
    });
  }

  // Inverted dropout. Identity (no tape node) when not training or rate == 0.
  Var dropout(Var X, double rate, bool training, Rng& rng) {
    if (!training || rate <= 0.0) return X;
    if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
    const Mat& x = val(X);
    std::vector<double> mask(x.a.size());
    double keep = 1.0 - rate;
    for (double& m : mask) m = rng.uniform() < rate ? 0.0 : 1.0 / keep;
    Mat out = x;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] *= mask[i];
    return push(std::move(out), {X}, [X, mask = std::move(mask)](Tape& t) {
      const Mat& g = t.grad(t.current_);
      Mat gx = g;
      for (size_t i = 0; i < gx.a.size(); ++i) gx.a[i] *= mask[i];
      t.accum(X, gx);
    });
  }

  // Batch normalization over the rows flagged in row_mask (empty mask = all
  // rows). Unmasked rows are transformed with the same statistics but do not
  // contribute to them. Training mode uses batch statistics and updates the
  // running state; eval mode uses the running state.
  Var batch_norm(Var X, Var gamma, Var beta, const std::vector<uint8_t>& row_mask, bool training,
                 BatchNormState* state, double momentum = 0.1, double eps = 1e-5) {
    const Mat& x = val(X);
    const int C = x.cols;
    check_shape(val(gamma).rows == 1 && val(gamma).cols == C, "ad::batch_norm gamma");
    check_shape(val(beta).rows == 1 && val(beta).cols == C, "ad::batch_norm beta");
    if (!row_mask.empty() && static_cast<int>(row_mask.size()) != x.rows)
      throw std::invalid_argument("batch_norm: row_mask size");

    Mat mean(1, C), var(1, C);
    int m = 0;
    if (training) {
      for (int i = 0; i < x.rows; ++i) {
        if (!row_mask.empty() && !row_mask[i]) continue;
        ++m;
        const double* r = x.row_ptr(i);
        for (int j = 0; j < C; ++j) mean.a[j] += r[j];
      }
      if (m == 0) throw std::invalid_argument("batch_norm: no rows selected");
      for (int j = 0; j < C; ++j) mean.a[j] /= m;
      for (int i = 0; i < x.rows; ++i) {
        if (!row_mask.empty() && !row_mask[i]) continue;
        const double* r = x.row_ptr(i);
        for (int j = 0; j < C; ++j) {
          double d = r[j] - mean.a[j];
          var.a[j] += d * d;
        }
      }
      for (int j = 0; j < C; ++j) var.a[j] /= m;
      if (state) {
        for (int j = 0; j < C; ++j) {
          state->running_mean.a[j] = (1.0 - momentum) * state->running_mean.a[j] + momentum * mean.a[j];
          state->running_var.a[j] = (1.0 - momentum) * state->running_var.a[j] + momentum * var.a[j];
        }
      }
    } else {
      if (!state) throw std::invalid_argument("batch_norm: eval mode requires running state");
      mean = state->running_mean;
      var = state->running_var;
    }

    const Mat& gv = val(gamma);
    const Mat& bv = val(beta);
    Mat inv_std(1, C);
    for (int j = 0; j < C; ++j) inv_std.a[j] = 1.0 / std::sqrt(var.a[j] + eps);
    Mat out(x.rows, C);
    for (int i = 0; i < x.rows; ++i) {
      const double* r = x.row_ptr(i);
      double* o = out.row_ptr(i);
      for (int j = 0; j < C; ++j) o[j] = gv.a[j] * (r[j] - mean.a[j]) * inv_std.a[j] + bv.a[j];
    }

    auto bw = [X, gamma, beta, row_mask, training, mean, inv_std, m](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& x2 = t.val(X);
      const Mat& gv2 = t.val(gamma);
      const int C2 = x2.cols;

      Mat dgamma(1, C2), dbeta(1, C2);
      // G1[j] = sum_r dy_rj,  G2[j] = sum_r dy_rj * (x_rj - mu_j)
      Mat G1(1, C2), G2(1, C2);
      for (int i = 0; i < x2.rows; ++i) {
        const double* gr = g.row_ptr(i);
        const double* xr = x2.row_ptr(i);
        for (int j = 0; j < C2; ++j) {
          double xc = xr[j] - mean.a[j];
          G1.a[j] += gr[j];
          G2.a[j] += gr[j] * xc;
          dgamma.a[j] += gr[j] * xc * inv_std.a[j];
          dbeta.a[j] += gr[j];
        }
      }
      t.accum(gamma, dgamma);
      t.accum(beta, dbeta);

      Mat gx(x2.rows, C2);
      if (training) {
        // Masked rows receive the statistics terms; all rows receive the
        // direct term. Exact for unmasked rows with zero downstream grad and
        // for the fully-unmasked case alike.
        for (int i = 0; i < x2.rows; ++i) {
          bool in_stats = row_mask.empty() || row_mask[i];
          const double* gr = g.row_ptr(i);
          const double* xr = x2.row_ptr(i);
          double* o = gx.row_ptr(i);
          for (int j = 0; j < C2; ++j) {
            double direct = gv2.a[j] * inv_std.a[j] * gr[j];
            if (in_stats) {
              double xc = xr[j] - mean.a[j];
              double via_mean = -gv2.a[j] * inv_std.a[j] * G1.a[j] / m;
              double via_var = -gv2.a[j] * inv_std.a[j] * inv_std.a[j] * inv_std.a[j] * xc * G2.a[j] / m;
              o[j] = direct + via_mean + via_var;
            } else {
              o[j] = direct;
            }
          }
        }
      } else {
        for (int i = 0; i < x2.rows; ++i) {
          const double* gr = g.row_ptr(i);
          double* o = gx.row_ptr(i);
          for (int j = 0; j < C2; ++j) o[j] = gv2.a[j] * inv_std.a[j] * gr[j];
        }
      }
      t.accum(X, gx);
    };
    return push(std::move(out), {X, gamma, beta}, std::move(bw));
  }

  // Scaled dot-product self-attention over a batch of equal-length sequences
  // stacked row-wise: rows [s*seq_len, (s+1)*seq_len) belong to sequence s.
  // valid[r] == 0 marks a pad position; pad keys are masked out of every
  // softmax. A sequence with no valid keys attends to nothing (output 0).
  // attn_out, when given, receives a copy of each sequence's weight matrix.
  Var seq_attention(Var Q, Var K, Var V, int seq_len, const std::vector<uint8_t>& valid,
                    std::vector<Mat>* attn_out = nullptr) {
    const Mat& q = val(Q);
    const Mat& k = val(K);
    const Mat& v = val(V);
    check_shape(q.same_shape(k) && q.same_shape(v), "ad::seq_attention inputs");
    if (seq_len <= 0 || q.rows % seq_len != 0) throw std::invalid_argument("seq_attention: bad seq_len");
    if (static_cast<int>(valid.size()) != q.rows) throw std::invalid_argument("seq_attention: valid size");
    const int num_seq = q.rows / seq_len;
    const int d = q.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    // Attention weights kept for the backward pass: num_seq blocks of n x n.
    auto attn = std::make_shared<std::vector<Mat>>();
    attn->reserve(num_seq);
    Mat out(q.rows, d);
    for (int s = 0; s < num_seq; ++s) {
      const int base = s * seq_len;
      Mat A(seq_len, seq_len);
      for (int i = 0; i < seq_len; ++i) {
        double* arow = A.row_ptr(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < seq_len; ++j) {
          if (!valid[base + j]) continue;
          arow[j] = dot(q.row_ptr(base + i), k.row_ptr(base + j), d) * scale;
          mx = std::max(mx, arow[j]);
        }
        double denom = 0.0;
        if (std::isfinite(mx)) {
          for (int j = 0; j < seq_len; ++j) {
            if (!valid[base + j]) { arow[j] = 0.0; continue; }
            arow[j] = std::exp(arow[j] - mx);
            denom += arow[j];
          }
          for (int j = 0; j < seq_len; ++j) arow[j] /= denom;
        } else {
          std::fill(arow, arow + seq_len, 0.0);  // all-pad sequence
        }
        double* orow = out.row_ptr(base + i);
        for (int j = 0; j < seq_len; ++j) {
          if (arow[j] == 0.0) continue;
          const double* vr = v.row_ptr(base + j);
          for (int c = 0; c < d; ++c) orow[c] += arow[j] * vr[c];
        }
      }
      attn->push_back(std::move(A));
    }
    if (attn_out) *attn_out = *attn;

    auto bw = [Q, K, V, seq_len, attn, scale](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& q2 = t.val(Q);
      const Mat& k2 = t.val(K);
      const Mat& v2 = t.val(V);
      const int d2 = q2.cols;
      const int num_seq2 = q2.rows / seq_len;
      Mat gq(q2.rows, d2), gk(q2.rows, d2), gv(q2.rows, d2);
      for (int s = 0; s < num_seq2; ++s) {
        const int base = s * seq_len;
        const Mat& A = (*attn)[s];
        // dV += A^T dOut ; dA = dOut V^T ; dS via softmax; dQ += dS K * scale ; dK += dS^T Q * scale
        Mat dA(seq_len, seq_len);
        for (int i = 0; i < seq_len; ++i) {
          const double* arow = A.row_ptr(i);
          const double* grow = g.row_ptr(base + i);
          double* darow = dA.row_ptr(i);
          for (int j = 0; j < seq_len; ++j) {
            if (arow[j] != 0.0) {
              double* gvr = gv.row_ptr(base + j);
              for (int c = 0; c < d2; ++c) gvr[c] += arow[j] * grow[c];
            }
            darow[j] = dot(grow, v2.row_ptr(base + j), d2);
          }
          // softmax backward restricted to the support of row i
          double inner = 0.0;
          for (int j = 0; j < seq_len; ++j) inner += darow[j] * arow[j];
          for (int j = 0; j < seq_len; ++j) {
            double ds = arow[j] * (darow[j] - inner);
            if (ds == 0.0) continue;
            double* gqr = gq.row_ptr(base + i);
            double* gkr = gk.row_ptr(base + j);
            const double* kr = k2.row_ptr(base + j);
            const double* qr = q2.row_ptr(base + i);
            for (int c = 0; c < d2; ++c) {
              gqr[c] += ds * scale * kr[c];
              gkr[c] += ds * scale * qr[c];
            }
          }
        }
      }
      t.accum(Q, gq);
      t.accum(K, gk);
      t.accum(V, gv);
    };
    return push(std::move(out), {Q, K, V}, std::move(bw));
  }

  // Mean-pool and max-pool over the valid rows of each sequence, concatenated
  // as [mean || max]. Sequences with no valid rows pool to the zero vector.
  Var pool_mean_max(Var H, int seq_len, const std::vector<uint8_t>& valid) {
    const Mat& h = val(H);
    if (seq_len <= 0 || h.rows % seq_len != 0) throw std::invalid_argument("pool_mean_max: bad seq_len");
    if (static_cast<int>(valid.size()) != h.rows) throw std::invalid_argument("pool_mean_max: valid size");
    const int num_seq = h.rows / seq_len;
    const int d = h.cols;
    auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(num_seq) * d, -1);
    auto counts = std::make_shared<std::vector<int>>(num_seq, 0);
    Mat out(num_seq, 2 * d);
    for (int s = 0; s < num_seq; ++s) {
      const int base = s * seq_len;
      double* o = out.row_ptr(s);
      int m = 0;
      for (int i = 0; i < seq_len; ++i) {
        if (!valid[base + i]) continue;
        ++m;
        const double* r = h.row_ptr(base + i);
        for (int c = 0; c < d; ++c) {
          o[c] += r[c];
          int& am = (*argmax)[static_cast<size_t>(s) * d + c];
          if (am < 0 || r[c] > h(am, c)) {
            am = base + i;
            o[d + c] = r[c];
          }
        }
      }
      (*counts)[s] = m;
      if (m > 0)
        for (int c = 0; c < d; ++c) o[c] /= m;
      else
        std::fill(o, o + 2 * d, 0.0);
    }
    auto bw = [H, seq_len, valid, argmax, counts](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& h2 = t.val(H);
      const int d2 = h2.cols;
      const int num_seq2 = h2.rows / seq_len;
      Mat gh(h2.rows, d2);
      for (int s = 0; s < num_seq2; ++s) {
        const int base = s * seq_len;
        const int m = (*counts)[s];
        if (m == 0) continue;
        const double* go = g.row_ptr(s);
        for (int i = 0; i < seq_len; ++i) {
          if (!valid[base + i]) continue;
          double* r = gh.row_ptr(base + i);
          for (int c = 0; c < d2; ++c) r[c] += go[c] / m;
        }
        for (int c = 0; c < d2; ++c) gh((*argmax)[static_cast<size_t>(s) * d2 + c], c) += go[d2 + c];
      }
      t.accum(H, gh);
    };
    return push(std::move(out), {H}, std::move(bw));
  }

  // Softmax of an E x 1 logit column within segments given by seg[e]; every
  // segment present in seg must be non-empty by construction.
  Var segment_softmax(Var logits, std::vector<int> seg, int num_segments) {
    const Mat& l = val(logits);
    check_shape(l.cols == 1 && static_cast<int>(seg.size()) == l.rows, "ad::segment_softmax");
    std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
    for (int e = 0; e < l.rows; ++e) mx[seg[e]] = std::max(mx[seg[e]], l.a[e]);
    Mat out(l.rows, 1);
    std::vector<double> denom(num_segments, 0.0);
    for (int e = 0; e < l.rows; ++e) {
      out.a[e] = std::exp(l.a[e] - mx[seg[e]]);
      denom[seg[e]] += out.a[e];
    }
    for (int e = 0; e < l.rows; ++e) out.a[e] /= denom[seg[e]];
    return push(std::move(out), {logits}, [logits, seg = std::move(seg), num_segments](Tape& t) {
      Var self = t.current_;
      const Mat& g = t.grad(self);
      const Mat& a = t.val(self);
      std::vector<double> inner(num_segments, 0.0);
      for (int e = 0; e < a.rows; ++e) inner[seg[e]] += g.a[e] * a.a[e];
      Mat gl(a.rows, 1);
      for (int e = 0; e < a.rows; ++e) gl.a[e] = a.a[e] * (g.a[e] - inner[seg[e]]);
      t.accum(logits, gl);
    });
  }

  // out[dst[e]] += w[e] * M.row(e)
  Var scatter_weighted_rows(Var M, Var w, std::vector<int> dst, int num_rows) {
    const Mat& m = val(M);
    const Mat& wv = val(w);
    check_shape(wv.cols == 1 && wv.rows == m.rows, "ad::scatter_weighted_rows w");
    if (static_cast<int>(dst.size()) != m.rows) throw std::invalid_argument("scatter_weighted_rows: dst size");
    for (int i : dst)
      if (i < 0 || i >= num_rows) throw std::out_of_range("scatter_weighted_rows: dst out of range");
    Mat out(num_rows, m.cols);
    for (int e = 0; e < m.rows; ++e) {
      double* o = out.row_ptr(dst[e]);
      const double* r = m.row_ptr(e);
      for (int c = 0; c < m.cols; ++c) o[c] += wv.a[e] * r[c];
    }
    return push(std::move(out), {M, w}, [M, w, dst = std::move(dst)](Tape& t) {
      const Mat& g = t.grad(t.current_);
      const Mat& m2 = t.val(M);
      const Mat& wv2 = t.val(w);
      Mat gm(m2.rows, m2.cols), gw(m2.rows, 1);
      for (int e = 0; e < m2.rows; ++e) {
        const double* go = g.row_ptr(dst[e]);
        const double* r = m2.row_ptr(e);
        double* gr = gm.row_ptr(e);
        double s = 0.0;
        for (int c = 0; c < m2.cols; ++c) {
          gr[c] = wv2.a[e] * go[c];
          s += r[c] * go[c];
        }
        gw.a[e] = s;
      }
      t.accum(M, gm);
      t.accum(w, gw);
    });
  }

  // Mean of the sigmoid surrogate loss l(t, y) = 1 / (1 + exp(t*y)) over an
  // m x 1 score column with a single label y in {+1, -1}. Returns 1 x 1.
  Var mean_sigmoid_loss(Var scores, int y) {
    if (y != 1 && y != -1) throw std::invalid_argument("mean_sigmoid_loss: y must be +1 or -1");
    const Mat& s = val(scores);
    check_shape(s.cols == 1, "ad::mean_sigmoid_loss");
    if (s.rows == 0) throw std::invalid_argument("mean_sigmoid_loss: empty scores");
    auto losses = std::make_shared<std::vector<double>>(s.rows);
    double total = 0.0;
    for (int i = 0; i < s.rows; ++i) {
      (*losses)[i] = stable_sigmoid(-s.a[i] * y);
      total += (*losses)[i];
    }
    Mat out(1, 1, total / s.rows);
    return push(std::move(out), {scores}, [scores, y, losses](Tape& t) {
      double go = t.grad(t.current_).a[0];
      const Mat& s2 = t.val(scores);
      Mat gs(s2.rows, 1);
      for (int i = 0; i < s2.rows; ++i) {
        double l = (*losses)[i];
        gs.a[i] = go * (-y) * l * (1.0 - l) / s2.rows;
      }
      t.accum(scores, gs);
    });
  }

  // Mean binary cross-entropy over scores: p = sigmoid(t) clamped to
  // [eps, 1-eps], labels in {0, 1}. Returns 1 x 1.
  Var mean_bce_loss(Var scores, const std::vector<int>& labels01, double eps = 1e-7) {
    const Mat& s = val(scores);
    check_shape(s.cols == 1, "ad::mean_bce_loss");
    if (s.rows == 0) throw std::invalid_argument("mean_bce_loss: empty scores");
    if (static_cast<int>(labels01.size()) != s.rows) throw std::invalid_argument("mean_bce_loss: label size");
    auto probs = std::make_shared<std::vector<double>>(s.rows);
    auto clamped = std::make_shared<std::vector<uint8_t>>(s.rows, 0);
    double total = 0.0;
    for (int i = 0; i < s.rows; ++i) {
      double p = stable_sigmoid(s.a[i]);
      if (p < eps) { p = eps; (*clamped)[i] = 1; }
      if (p > 1.0 - eps) { p = 1.0 - eps; (*clamped)[i] = 1; }
      (*probs)[i] = p;
      total += labels01[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    Mat out(1, 1, total / s.rows);
    return push(std::move(out), {scores}, [scores, labels01, probs, clamped](Tape& t) {
      double go = t.grad(t.current_).a[0];
      const Mat& s2 = t.val(scores);
      Mat gs(s2.rows, 1);
      for (int i = 0; i < s2.rows; ++i) {
        if ((*clamped)[i]) { gs.a[i] = 0.0; continue; }
        double p = (*probs)[i];
        gs.a[i] = go * (p - labels01[i]) / s2.rows;
      }
      t.accum(scores, gs);
    });
  }

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Mat val;
    Mat grad;  // allocated lazily on first accumulation
    std::function<void(Tape&)> backward;
  };

  Var push(Mat val, const std::vector<Var>& inputs, std::function<void(Tape&)> bw) {
    for (Var v : inputs)
      if (!v.valid()) throw std::invalid_argument("op on invalid Var");
    Node n;
    n.val = std::move(val);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accum(Var v, const Mat& g) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Mat(n.val.rows, n.val.cols);
    add_inplace(n.grad, g);
  }

  // The node whose backward closure is currently executing. backward()
  // assigns it before each call so closures can locate their own grad/val.
  Var current_{-1};

  // deque keeps references from val()/grad() stable while later ops are
  // recorded; vector reallocation would dangle them.
  std::deque<Node> nodes_;
};

}  // namespace pugnn::ad
