#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "omni/sampler.hpp"

namespace omni {
namespace {

std::vector<double> random_logits(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<double> z(n);
  for (auto& v : z) v = g(rng);
  return z;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TEST(Nucleus, KeepsTheModeAndNormalizes) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> top(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_logits(rng, 20);
    SamplerConfig cfg;
    cfg.top_p = top(rng);
    cfg.repetition_penalty = 1.0;
    const auto p = nucleus_distribution(z, {}, cfg);
    EXPECT_GT(p[argmax(z)], 0.0);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Nucleus, SmallestSetReachingTopP) {
  // softmax(log p) = p for p = (0.5, 0.3, 0.2).
  const std::vector<double> z{std::log(0.5), std::log(0.3), std::log(0.2)};
  SamplerConfig cfg;
  cfg.repetition_penalty = 1.0;
  cfg.top_p = 0.75;
  auto p = nucleus_distribution(z, {}, cfg);
  EXPECT_NEAR(p[0], 0.5 / 0.8, 1e-12);
  EXPECT_NEAR(p[1], 0.3 / 0.8, 1e-12);
  EXPECT_EQ(p[2], 0.0);
  cfg.top_p = 0.4;
  p = nucleus_distribution(z, {}, cfg);
  EXPECT_EQ(p, (std::vector<double>{1.0, 0.0, 0.0}));
  cfg.top_p = 1.0;
  p = nucleus_distribution(z, {}, cfg);
  EXPECT_GT(p[2], 0.0);
}

TEST(Nucleus, LowTemperatureIsArgmax) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = random_logits(rng, 30);
    SamplerConfig cfg;
    cfg.top_p = 1.0;
    cfg.temperature = 1e-6;
    cfg.repetition_penalty = 1.0;
    std::mt19937_64 draw(static_cast<std::uint64_t>(trial));
    EXPECT_EQ(static_cast<std::size_t>(sample_token(z, {}, cfg, draw)), argmax(z));
  }
}

TEST(Nucleus, RepetitionPenaltyShrinksSeenTokensOnce) {
  const std::vector<double> z{2.0, -1.0, 0.5};
  SamplerConfig cfg;
  cfg.top_p = 1.0;
  cfg.repetition_penalty = 2.0;
  const std::vector<int> history{0, 1, 0, 0};
  const auto p = nucleus_distribution(z, history, cfg);
  // Penalized logits: 2 / 2 = 1, -1 * 2 = -2, 0.5 unchanged.
  const double e0 = std::exp(1.0), e1 = std::exp(-2.0), e2 = std::exp(0.5);
  const double s = e0 + e1 + e2;
  EXPECT_NEAR(p[0], e0 / s, 1e-12);
  EXPECT_NEAR(p[1], e1 / s, 1e-12);
  EXPECT_NEAR(p[2], e2 / s, 1e-12);
}

TEST(Nucleus, RejectsBadInput) {
  SamplerConfig cfg;
  const std::vector<double> z{0.0, 1.0};
  cfg.top_p = 0.0;
  EXPECT_THROW(nucleus_distribution(z, {}, cfg), std::invalid_argument);
  cfg = {};
  cfg.temperature = 0.0;
  EXPECT_THROW(nucleus_distribution(z, {}, cfg), std::invalid_argument);
  cfg = {};
  EXPECT_THROW(nucleus_distribution({}, {}, cfg), std::invalid_argument);
  const std::vector<double> inf{0.0, INFINITY};
  EXPECT_THROW(nucleus_distribution(inf, {}, cfg), std::invalid_argument);
}

TEST(TokenSampler, SameSeedSameTokens) {
  std::mt19937_64 rng(3);
  const auto z = random_logits(rng, 50);
  SamplerConfig cfg;
  cfg.seed = 99;
  TokenSampler a(cfg), b(cfg), other_stream(cfg, 1);
  std::vector<int> ta, tb, tc;
  for (int i = 0; i < 100; ++i) {
    ta.push_back(a.sample(z, ta));
    tb.push_back(b.sample(z, tb));
    tc.push_back(other_stream.sample(z, tc));
  }
  EXPECT_EQ(ta, tb);
  EXPECT_NE(ta, tc);
}

TEST(TokenSampler, DrawsFollowTheDistribution) {
  const std::vector<double> z{std::log(0.6), std::log(0.3), std::log(0.1)};
  SamplerConfig cfg;
  cfg.top_p = 1.0;
  cfg.repetition_penalty = 1.0;
  cfg.seed = 4;
  TokenSampler s(cfg);
  std::array<int, 3> counts{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(s.sample(z, {}))];
  EXPECT_NEAR(counts[0] / double(n), 0.6, 0.02);
  EXPECT_NEAR(counts[1] / double(n), 0.3, 0.02);
  EXPECT_NEAR(counts[2] / double(n), 0.1, 0.02);
}

}  // namespace
}  // namespace omni
