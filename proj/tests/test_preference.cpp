#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "omni/preference.hpp"

namespace omni {
namespace {

// Independent reference: the product of per-step softmax probabilities.
double product_of_softmax(const Eigen::MatrixXd& logits, const std::vector<int>& tokens) {
  double prob = 1.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    double z = 0.0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v) z += std::exp(logits(t, v));
    prob *= std::exp(logits(t, tokens[static_cast<std::size_t>(t)])) / z;
  }
  return prob;
}

DpoTriplet triplet(double pw, double pl, double rw, double rl, double beta) {
  return {pw, pl, rw, rl, beta};
}

// Random multiple of 1/64 in [-32, 0]: sums and differences stay exact.
double dyadic(std::mt19937_64& rng) {
  return -static_cast<double>(std::uniform_int_distribution<int>(0, 2048)(rng)) / 64.0;
}

TEST(SequenceLogprob, UniformLogits) {
  const Eigen::MatrixXd logits = Eigen::MatrixXd::Constant(5, 8, 0.3);
  const std::vector<int> tokens{0, 7, 3, 3, 1};
  EXPECT_NEAR(sequence_logprob(logits, tokens), 5 * std::log(1.0 / 8.0), 1e-12);
}

TEST(SequenceLogprob, DominantLogitApproachesZero) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(3, 4);
  const std::vector<int> tokens{2, 0, 1};
  for (int t = 0; t < 3; ++t) logits(t, tokens[static_cast<std::size_t>(t)]) = 60.0;
  EXPECT_NEAR(sequence_logprob(logits, tokens), 0.0, 1e-20);
  logits(0, 2) = 1e6;
  EXPECT_TRUE(std::isfinite(sequence_logprob(logits, tokens)));
}

TEST(SequenceLogprob, MatchesProductOfSoftmax) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd logits(6, 10);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = g(rng);
    std::vector<int> tokens(6);
    for (auto& t : tokens) t = std::uniform_int_distribution<int>(0, 9)(rng);
    EXPECT_NEAR(sequence_logprob(logits, tokens), std::log(product_of_softmax(logits, tokens)),
                1e-12);
  }
}

TEST(SequenceLogprob, RejectsBadTokens) {
  const Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(2, 3);
  EXPECT_THROW(sequence_logprob(logits, std::vector<int>{0}), std::invalid_argument);
  EXPECT_THROW(sequence_logprob(logits, std::vector<int>{0, 3}), std::out_of_range);
}

TEST(DpoLoss, ZeroMarginIsLogTwo) {
  EXPECT_NEAR(dpo_loss(triplet(-3.0, -5.0, -3.0, -5.0, 0.1)), std::log(2.0), 1e-12);
  EXPECT_NEAR(dpo_loss(triplet(-1.25, -1.25, -7.5, -7.5, 2.0)), std::log(2.0), 1e-12);
}

TEST(DpoLoss, HandComputedCase) {
  // (policy_w - ref_w) = 1, (policy_l - ref_l) = 0, beta = 0.1.
  const double want = std::log(1.0 + std::exp(-0.1));
  EXPECT_NEAR(want, 0.644397, 1e-6);
  EXPECT_NEAR(dpo_loss(triplet(-1.0, -4.0, -2.0, -4.0, 0.1)), want, 1e-12);
}

TEST(DpoLoss, MonotoneWithFiniteLimits) {
  double prev = INFINITY;
  for (double m = -700.0; m <= 700.0; m += 25.0) {
    const double l = dpo_loss(triplet(m, 0.0, 0.0, 0.0, 1.0));
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_LT(l, prev);
    prev = l;
  }
  EXPECT_NEAR(dpo_loss(triplet(1000.0, 0.0, 0.0, 0.0, 1.0)), 0.0, 1e-300);
  EXPECT_NEAR(dpo_loss(triplet(-1000.0, 0.0, 0.0, 0.0, 1.0)), 1000.0, 1e-9);
  EXPECT_THROW(dpo_loss(triplet(0, 0, 0, 0, 0.0)), std::invalid_argument);
}

TEST(DpoLoss, BetaScalingAndShiftInvarianceAreExact) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto t = triplet(dyadic(rng), dyadic(rng), dyadic(rng), dyadic(rng), 0.125);
    const double c = std::ldexp(1.0, std::uniform_int_distribution<int>(-3, 3)(rng));
    const auto scaled_beta = triplet(t.lp_policy_w, t.lp_policy_l, t.lp_ref_w, t.lp_ref_l, c * t.beta);
    const auto scaled_lp =
        triplet(c * t.lp_policy_w, c * t.lp_policy_l, c * t.lp_ref_w, c * t.lp_ref_l, t.beta);
    EXPECT_EQ(dpo_loss(scaled_beta), dpo_loss(scaled_lp));

    const double s = dyadic(rng);
    const auto shift_w = triplet(t.lp_policy_w + s, t.lp_policy_l, t.lp_ref_w + s, t.lp_ref_l, t.beta);
    const auto shift_l = triplet(t.lp_policy_w, t.lp_policy_l + s, t.lp_ref_w, t.lp_ref_l + s, t.beta);
    EXPECT_EQ(dpo_loss(shift_w), dpo_loss(t));
    EXPECT_EQ(dpo_loss(shift_l), dpo_loss(t));
  }
}

TEST(DpoGradient, SignsAndValuesMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lp(-20.0, 0.0), beta(0.05, 2.0);
  const double eps = 1e-6;
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = triplet(lp(rng), lp(rng), lp(rng), lp(rng), beta(rng));
    const auto g = dpo_gradient(t);
    EXPECT_LT(g.d_policy_w, 0.0);
    EXPECT_GT(g.d_policy_l, 0.0);
    EXPECT_GT(g.d_ref_w, 0.0);
    EXPECT_LT(g.d_ref_l, 0.0);
    const std::array<double DpoTriplet::*, 4> fields{&DpoTriplet::lp_policy_w, &DpoTriplet::lp_policy_l,
                                                     &DpoTriplet::lp_ref_w, &DpoTriplet::lp_ref_l};
    const std::array<double, 4> analytic{g.d_policy_w, g.d_policy_l, g.d_ref_w, g.d_ref_l};
    for (std::size_t f = 0; f < 4; ++f) {
      auto up = t, dn = t;
      up.*fields[f] += eps;
      dn.*fields[f] -= eps;
      const double numeric = (dpo_loss(up) - dpo_loss(dn)) / (2 * eps);
      EXPECT_EQ(std::signbit(numeric), std::signbit(analytic[f]));
      EXPECT_NEAR(numeric, analytic[f], 1e-7 + 1e-6 * std::abs(analytic[f]));
    }
  }
}

TEST(RankCandidates, Examples) {
  using C = std::vector<std::pair<std::string, double>>;
  auto r = rank_candidates(C{{"a", 0.9}, {"b", 0.1}});
  EXPECT_EQ(r.winner, 0u);
  EXPECT_EQ(r.loser, 1u);
  EXPECT_EQ(r.chosen, "a");
  EXPECT_EQ(r.rejected, "b");

  r = rank_candidates(C{{"a", 0.5}, {"b", 0.5}});
  EXPECT_EQ(r.winner, 0u);
  EXPECT_EQ(r.loser, 1u);

  r = rank_candidates(C{{"a", 0.2}, {"b", 0.8}, {"c", 0.5}});
  EXPECT_EQ(r.winner, 1u);
  EXPECT_EQ(r.loser, 0u);

  EXPECT_THROW(rank_candidates(C{{"a", 1.0}}), std::invalid_argument);
}

TEST(RankCandidates, MatchesBruteForce) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> n(2, 7), reward(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::pair<int, double>> c;
    const int k = n(rng);
    for (int i = 0; i < k; ++i) c.emplace_back(i, reward(rng) / 4.0);
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
      if (c[i].second > c[best].second) best = i;
    std::size_t worst = c.size();
    for (std::size_t i = 0; i < c.size(); ++i)
      if (i != best && (worst == c.size() || c[i].second < c[worst].second)) worst = i;
    const auto r = rank_candidates(c);
    EXPECT_EQ(r.winner, best);
    EXPECT_EQ(r.loser, worst);
  }
}

}  // namespace
}  // namespace omni
