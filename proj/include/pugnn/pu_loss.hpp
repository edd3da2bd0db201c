#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pugnn/autodiff.hpp"
#include "pugnn/tensor.hpp"

namespace pugnn {

// Class prior of the positive class; the negative prior is derived.
struct ClassPrior {
  double pi_p;
  double pi_n() const { return 1.0 - pi_p; }

  explicit ClassPrior(double p) : pi_p(p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("class prior must lie in (0,1)");
  }
};

// Sigmoid surrogate loss l(t, y) = 1 / (1 + exp(t*y)), smooth in t.
inline double sigmoid_loss(double t, int y) {
  if (y != 1 && y != -1) throw std::invalid_argument("sigmoid_loss: y must be +1 or -1");
  return stable_sigmoid(-t * y);
}

inline double mean_sigmoid_loss(const std::vector<double>& scores, int y) {
  double s = 0.0;
  for (double t : scores) s += sigmoid_loss(t, y);
  return s / scores.size();
}

// Empirical risks of one decision function evaluated on P and U samples.
// correction = R_u^- - pi_p * R_p^- is the term the non-negative estimator
// clamps at zero (the uPU identity's estimate of pi_n * R_n^-).
struct RiskEstimate {
  double r_p_pos = 0.0;  // R_p^+
  double r_p_neg = 0.0;  // R_p^-
  double r_u_neg = 0.0;  // R_u^-
  double upu = 0.0;
  double nnpu = 0.0;
  double correction = 0.0;
};

enum class NnpuCorrectionMode {
  kPriorWeighted,  // max(0, R_u^- - pi_p * R_p^-); consistent with the uPU identity
  kLiteral,        // max(0, R_u^- - R_p^-) exactly as printed
};

inline RiskEstimate compute_risks(const std::vector<double>& scores_p,
                                  const std::vector<double>& scores_u, ClassPrior prior,
                                  NnpuCorrectionMode mode = NnpuCorrectionMode::kPriorWeighted) {
  if (scores_p.empty()) throw std::invalid_argument("risk estimate: positive score set is empty");
  if (scores_u.empty()) throw std::invalid_argument("risk estimate: unlabeled score set is empty");
  RiskEstimate r;
  r.r_p_pos = mean_sigmoid_loss(scores_p, +1);
  r.r_p_neg = mean_sigmoid_loss(scores_p, -1);
  r.r_u_neg = mean_sigmoid_loss(scores_u, -1);
  r.upu = prior.pi_p * r.r_p_pos - prior.pi_p * r.r_p_neg + r.r_u_neg;
  double weight = mode == NnpuCorrectionMode::kPriorWeighted ? prior.pi_p : 1.0;
  r.correction = r.r_u_neg - weight * r.r_p_neg;
  r.nnpu = prior.pi_p * r.r_p_pos + std::max(0.0, r.correction);
  return r;
}

// R_pn = pi_p * R_p^+ + pi_n * R_n^- on fully labeled data.
inline double risk_pn(const std::vector<double>& scores_p, const std::vector<double>& scores_n,
                      ClassPrior prior) {
  if (scores_p.empty()) throw std::invalid_argument("risk_pn: positive score set is empty");
  if (scores_n.empty()) throw std::invalid_argument("risk_pn: negative score set is empty");
  return prior.pi_p * mean_sigmoid_loss(scores_p, +1) + prior.pi_n() * mean_sigmoid_loss(scores_n, -1);
}

inline RiskEstimate risk_upu(const std::vector<double>& scores_p, const std::vector<double>& scores_u,
                             ClassPrior prior) {
  return compute_risks(scores_p, scores_u, prior);
}

inline RiskEstimate risk_nnpu(const std::vector<double>& scores_p, const std::vector<double>& scores_u,
                              ClassPrior prior,
                              NnpuCorrectionMode mode = NnpuCorrectionMode::kPriorWeighted) {
  return compute_risks(scores_p, scores_u, prior, mode);
}

// Mean binary cross-entropy between probabilities and one-hot labels,
// used by the w/o-PU ablation. Probabilities are clamped away from {0,1}.
inline double cross_entropy_loss(const std::vector<double>& probabilities,
                                 const std::vector<int>& one_hot_labels, double eps = 1e-7) {
  if (probabilities.size() != one_hot_labels.size())
    throw std::invalid_argument("cross_entropy_loss: size mismatch between probabilities and labels");
  if (probabilities.empty()) throw std::invalid_argument("cross_entropy_loss: empty input");
  double total = 0.0;
  for (size_t i = 0; i < probabilities.size(); ++i) {
    int y = one_hot_labels[i];
    if (y != 0 && y != 1) throw std::invalid_argument("cross_entropy_loss: labels must be one-hot {0,1}");
    double p = std::min(1.0 - eps, std::max(eps, probabilities[i]));
    total += y ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / probabilities.size();
}

// Gradient-step handling when the nnPU correction goes negative.
enum class NnpuGradientMode {
  kClamp,          // descend on the clamped objective itself
  kNegateDescend,  // descend on the negated correction to push it back up
};

// Tape-level nnPU / uPU objective used by the training loop. scores_p and
// scores_u are m x 1 columns on the tape. Returns the scalar whose gradient
// drives the optimizer step; the reported risk values come from the same
// component means.
struct PuLossVars {
  ad::Var objective;  // scalar used for the gradient step
  RiskEstimate risks;
};

inline PuLossVars nnpu_objective(ad::Tape& tape, ad::Var scores_p, ad::Var scores_u, ClassPrior prior,
                                 NnpuCorrectionMode cmode = NnpuCorrectionMode::kPriorWeighted,
                                 NnpuGradientMode gmode = NnpuGradientMode::kClamp) {
  ad::Var lp_pos = tape.mean_sigmoid_loss(scores_p, +1);
  ad::Var lp_neg = tape.mean_sigmoid_loss(scores_p, -1);
  ad::Var lu_neg = tape.mean_sigmoid_loss(scores_u, -1);
  double weight = cmode == NnpuCorrectionMode::kPriorWeighted ? prior.pi_p : 1.0;
  ad::Var corr = tape.sub(lu_neg, tape.scale(lp_neg, weight));

  PuLossVars out;
  out.risks.r_p_pos = tape.scalar(lp_pos);
  out.risks.r_p_neg = tape.scalar(lp_neg);
  out.risks.r_u_neg = tape.scalar(lu_neg);
  out.risks.correction = tape.scalar(corr);
  out.risks.upu = prior.pi_p * out.risks.r_p_pos - prior.pi_p * out.risks.r_p_neg + out.risks.r_u_neg;
  out.risks.nnpu = prior.pi_p * out.risks.r_p_pos + std::max(0.0, out.risks.correction);

  if (out.risks.correction < 0.0 && gmode == NnpuGradientMode::kNegateDescend) {
    // Defensive step of Kiryo et al.: minimize -(R_u^- - w * R_p^-) alone.
    out.objective = tape.scale(corr, -1.0);
  } else {
    out.objective = tape.add(tape.scale(lp_pos, prior.pi_p), tape.relu(corr));
  }
  return out;
}

inline PuLossVars upu_objective(ad::Tape& tape, ad::Var scores_p, ad::Var scores_u, ClassPrior prior) {
  ad::Var lp_pos = tape.mean_sigmoid_loss(scores_p, +1);
  ad::Var lp_neg = tape.mean_sigmoid_loss(scores_p, -1);
  ad::Var lu_neg = tape.mean_sigmoid_loss(scores_u, -1);
  PuLossVars out;
  out.risks.r_p_pos = tape.scalar(lp_pos);
  out.risks.r_p_neg = tape.scalar(lp_neg);
  out.risks.r_u_neg = tape.scalar(lu_neg);
  out.risks.correction = tape.scalar(lu_neg) - prior.pi_p * tape.scalar(lp_neg);
  out.risks.upu = prior.pi_p * out.risks.r_p_pos - prior.pi_p * out.risks.r_p_neg + out.risks.r_u_neg;
  out.risks.nnpu = prior.pi_p * out.risks.r_p_pos + std::max(0.0, out.risks.correction);
  out.objective =
      tape.add(tape.sub(tape.scale(lp_pos, prior.pi_p), tape.scale(lp_neg, prior.pi_p)), lu_neg);
  return out;
}

}  // namespace pugnn
