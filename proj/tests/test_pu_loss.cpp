#include <doctest.h>

#include <cmath>

#include "fd_util.hpp"
#include "pugnn/pu_loss.hpp"
#include "pugnn/rng.hpp"

using namespace pugnn;
using fdtest::fd_check;

TEST_CASE("sigmoid_loss closed form") {
  CHECK(sigmoid_loss(0.0, +1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sigmoid_loss(0.0, -1) == doctest::Approx(0.5).epsilon(1e-15));
  // saturation limits
  CHECK(sigmoid_loss(1e4, +1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sigmoid_loss(1e4, -1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(sigmoid_loss(1e308, -1)));
  // direct evaluation of 1/(1+e) at t=1, y=+1
  CHECK(sigmoid_loss(1.0, +1) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-15));
  CHECK(sigmoid_loss(1.0, +1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK_THROWS_AS(sigmoid_loss(0.0, 2), std::invalid_argument);
}

TEST_CASE("risk_pn hand evaluations") {
  ClassPrior prior(0.3);
  // all scores zero -> 0.5 regardless of prior
  CHECK(risk_pn({0.0, 0.0}, {0.0}, prior) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(risk_pn({0.0}, {0.0}, ClassPrior(0.9)) == doctest::Approx(0.5).epsilon(1e-15));
  // perfect separation saturates to ~0
  CHECK(risk_pn({10.0, 10.0}, {-10.0, -10.0}, prior) < 1e-3);
  // pi_p=0.3, scores_p=[1], scores_n=[-1]: 0.3*l(1,+1) + 0.7*l(-1,-1)
  double expect = 0.3 * (1.0 / (1.0 + std::exp(1.0))) + 0.7 * (1.0 / (1.0 + std::exp(1.0)));
  CHECK(risk_pn({1.0}, {-1.0}, prior) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(risk_pn({1.0}, {-1.0}, prior) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(risk_pn({}, {0.0}, prior), doctest::Contains("positive"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(risk_pn({0.0}, {}, prior), doctest::Contains("negative"), std::invalid_argument);
}

TEST_CASE("risk_upu: components cancel at zero scores, negative risk exhibited") {
  // all scores 0: pi*0.5 - pi*0.5 + 0.5 = 0.5 for any prior
  for (double p : {0.1, 0.5, 0.9})
    CHECK(risk_upu({0.0}, {0.0, 0.0}, ClassPrior(p)).upu == doctest::Approx(0.5).epsilon(1e-15));

  // pi_p=0.8, scores_p=[+10,+10], scores_u=[+10,-10]: component means by the
  // sigmoid formula give ~0 - 0.8*~1 + 0.5 = -0.3
  RiskEstimate r = risk_upu({10.0, 10.0}, {10.0, -10.0}, ClassPrior(0.8));
  double lp_pos = 1.0 / (1.0 + std::exp(10.0));
  double lp_neg = 1.0 / (1.0 + std::exp(-10.0));
  double lu_neg = 0.5 * (1.0 / (1.0 + std::exp(-10.0)) + 1.0 / (1.0 + std::exp(10.0)));
  CHECK(r.upu == doctest::Approx(0.8 * lp_pos - 0.8 * lp_neg + lu_neg).epsilon(1e-12));
  CHECK(r.upu == doctest::Approx(-0.3).epsilon(1e-3));
  CHECK(r.upu < 0.0);

  CHECK_THROWS_AS(risk_upu({}, {0.0}, ClassPrior(0.5)), std::invalid_argument);
  CHECK_THROWS_AS(risk_upu({0.0}, {}, ClassPrior(0.5)), std::invalid_argument);
}

TEST_CASE("risk_nnpu clamps the negative-uPU case") {
  ClassPrior prior(0.8);
  RiskEstimate r = risk_nnpu({10.0, 10.0}, {10.0, -10.0}, prior);
  CHECK(r.correction < 0.0);
  CHECK(r.nnpu == doctest::Approx(prior.pi_p * r.r_p_pos).epsilon(1e-12));
  CHECK(r.nnpu < 1e-3);
  CHECK(r.nnpu > r.upu);

  // all scores zero: correction = 0.5*(1 - pi_p) >= 0, nnpu == upu == 0.5
  for (double p : {0.2, 0.6}) {
    RiskEstimate z = risk_nnpu({0.0, 0.0}, {0.0}, ClassPrior(p));
    CHECK(z.nnpu == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(z.correction >= 0.0);
    CHECK(z.nnpu == doctest::Approx(z.upu).epsilon(1e-15));
  }
}

TEST_CASE("nnpu == upu whenever correction >= 0, nnpu always nonnegative") {
  Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    int np = rng.uniform_int(1, 8), nu = rng.uniform_int(1, 8);
    std::vector<double> sp(np), su(nu);
    for (double& v : sp) v = rng.uniform(-6.0, 6.0);
    for (double& v : su) v = rng.uniform(-6.0, 6.0);
    ClassPrior prior(rng.uniform(0.05, 0.95));
    RiskEstimate r = compute_risks(sp, su, prior);
    CHECK(r.nnpu >= 0.0);
    CHECK(r.nnpu >= prior.pi_p * r.r_p_pos - 1e-15);
    if (r.correction >= 0.0) CHECK(std::fabs(r.nnpu - r.upu) <= 1e-12);
  }
}

TEST_CASE("literal correction mode drops the prior weight") {
  RiskEstimate r = compute_risks({2.0}, {-1.0, 0.5}, ClassPrior(0.4), NnpuCorrectionMode::kLiteral);
  double lp_neg = sigmoid_loss(2.0, -1);
  double lu_neg = 0.5 * (sigmoid_loss(-1.0, -1) + sigmoid_loss(0.5, -1));
  CHECK(r.correction == doctest::Approx(lu_neg - lp_neg).epsilon(1e-12));
}

TEST_CASE("monotone saturation: raising positive scores never raises R_p^+") {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> sp(4), su(3);
    for (double& v : sp) v = rng.uniform(-4.0, 4.0);
    for (double& v : su) v = rng.uniform(-4.0, 4.0);
    RiskEstimate base = compute_risks(sp, su, ClassPrior(0.3));
    for (double& v : sp) v += rng.uniform(0.0, 2.0);
    RiskEstimate bumped = compute_risks(sp, su, ClassPrior(0.3));
    CHECK(bumped.r_p_pos <= base.r_p_pos + 1e-15);
  }
}

TEST_CASE("uPU is an unbiased estimate of the PN risk on mixture unlabeled data") {
  // Unlabeled drawn as a pi_p mixture of the positive and negative score
  // distributions; uPU on (P, U) must agree with the PN risk computed from
  // independent labeled samples within Monte-Carlo error.
  const int n = 100000;
  Rng rng(2024);
  for (double pi : {0.1, 0.3, 0.5}) {
    ClassPrior prior(pi);
    std::vector<double> sp(n), su(n), pn_p(n), pn_n(n);
    for (double& v : sp) v = rng.normal(1.0, 1.0);
    for (double& v : su) v = rng.uniform() < pi ? rng.normal(1.0, 1.0) : rng.normal(-1.0, 1.0);
    for (double& v : pn_p) v = rng.normal(1.0, 1.0);
    for (double& v : pn_n) v = rng.normal(-1.0, 1.0);

    RiskEstimate upu = risk_upu(sp, su, prior);
    double pn = risk_pn(pn_p, pn_n, prior);

    // standard error of the difference from per-sample variances
    auto var_of = [](const std::vector<double>& xs, auto f) {
      double m = 0.0, m2 = 0.0;
      for (double x : xs) {
        double y = f(x);
        m += y;
        m2 += y * y;
      }
      m /= xs.size();
      return m2 / xs.size() - m * m;
    };
    double var_p_pair = var_of(sp, [&](double t) {
      return pi * (sigmoid_loss(t, +1) - sigmoid_loss(t, -1));
    });
    double var_u = var_of(su, [](double t) { return sigmoid_loss(t, -1); });
    double var_pn_p = var_of(pn_p, [&](double t) { return pi * sigmoid_loss(t, +1); });
    double var_pn_n = var_of(pn_n, [&](double t) { return (1.0 - pi) * sigmoid_loss(t, -1); });
    double se = std::sqrt((var_p_pair + var_u + var_pn_p + var_pn_n) / n);
    CHECK(std::fabs(upu.upu - pn) <= 3.0 * se);
  }
}

TEST_CASE("cross_entropy_loss values") {
  // perfect predictions after clamping
  CHECK(cross_entropy_loss({1.0, 0.0}, {1, 0}) == doctest::Approx(0.0).epsilon(1e-5));
  // 0.5 everywhere -> ln 2 per sample
  CHECK(cross_entropy_loss({0.5, 0.5, 0.5}, {1, 0, 1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // y=1, p=0.9 -> -ln 0.9
  CHECK(cross_entropy_loss({0.9}, {1}) == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
  CHECK(cross_entropy_loss({0.9}, {1}) == doctest::Approx(0.10536051565782628).epsilon(1e-10));
  CHECK_THROWS_AS(cross_entropy_loss({0.5}, {1, 0}), std::invalid_argument);
}

TEST_CASE("tape nnPU objective matches the pure implementation and its gradient is exact") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    int np = rng.uniform_int(2, 6), nu = rng.uniform_int(2, 6);
    Mat sp = fdtest::random_mat(np, 1, rng, -3.0, 3.0);
    Mat su = fdtest::random_mat(nu, 1, rng, -3.0, 3.0);
    ClassPrior prior(rng.uniform(0.1, 0.9));

    std::vector<double> spv(sp.a), suv(su.a);
    RiskEstimate pure = compute_risks(spv, suv, prior);

    ad::Tape t;
    PuLossVars lv = nnpu_objective(t, t.leaf(sp), t.leaf(su), prior);
    CHECK(lv.risks.nnpu == doctest::Approx(pure.nnpu).epsilon(1e-14));
    CHECK(lv.risks.upu == doctest::Approx(pure.upu).epsilon(1e-14));
    CHECK(t.scalar(lv.objective) == doctest::Approx(pure.nnpu).epsilon(1e-14));

    // gradient through the clamp, on whichever side this trial landed
    auto rep = fd_check(
        [&](ad::Tape& tp, const std::vector<ad::Var>& v) {
          return nnpu_objective(tp, v[0], v[1], prior).objective;
        },
        {sp, su});
    CHECK(rep.max_rel_err < 1e-6);
  }
}

TEST_CASE("tape nnPU gradient on both sides of the clamp boundary") {
  // correction > 0: moderate scores
  Mat sp_pos(2, 1);
  sp_pos.a = {0.5, -0.2};
  Mat su_pos(2, 1);
  su_pos.a = {0.1, -0.6};
  ClassPrior prior(0.4);
  {
    ad::Tape t;
    PuLossVars lv = nnpu_objective(t, t.leaf(sp_pos), t.leaf(su_pos), prior);
    REQUIRE(lv.risks.correction > 0.0);
  }
  auto build = [&](ad::Tape& tp, const std::vector<ad::Var>& v) {
    return nnpu_objective(tp, v[0], v[1], prior).objective;
  };
  CHECK(fd_check(build, {sp_pos, su_pos}).max_rel_err < 1e-6);

  // correction < 0: positives score high, unlabeled scores low
  Mat sp_neg(2, 1);
  sp_neg.a = {4.0, 5.0};
  Mat su_neg(2, 1);
  su_neg.a = {0.0, -1.0};
  ClassPrior prior_hi(0.9);
  {
    ad::Tape t;
    PuLossVars lv = nnpu_objective(t, t.leaf(sp_neg), t.leaf(su_neg), prior_hi);
    REQUIRE(lv.risks.correction < 0.0);
  }
  auto build_hi = [&](ad::Tape& tp, const std::vector<ad::Var>& v) {
    return nnpu_objective(tp, v[0], v[1], prior_hi).objective;
  };
  CHECK(fd_check(build_hi, {sp_neg, su_neg}).max_rel_err < 1e-6);
}

TEST_CASE("negate-descend mode flips the step target when the correction is negative") {
  Mat sp(2, 1);
  sp.a = {4.0, 5.0};
  Mat su(2, 1);
  su.a = {0.0, -1.0};
  ClassPrior prior(0.9);
  ad::Tape t;
  PuLossVars lv = nnpu_objective(t, t.leaf(sp), t.leaf(su), prior, NnpuCorrectionMode::kPriorWeighted,
                                 NnpuGradientMode::kNegateDescend);
  REQUIRE(lv.risks.correction < 0.0);
  CHECK(t.scalar(lv.objective) == doctest::Approx(-lv.risks.correction).epsilon(1e-14));
  // reported risk value still the clamped one
  CHECK(lv.risks.nnpu == doctest::Approx(prior.pi_p * lv.risks.r_p_pos).epsilon(1e-14));
}
