#include "omni/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace omni {

void SamplerConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
  if (!(repetition_penalty >= 1.0))
    throw std::invalid_argument("repetition_penalty must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

std::vector<double> nucleus_distribution(std::span<const double> logits,
                                         std::span<const int> history,
                                         const SamplerConfig& cfg) {
  cfg.validate();
  if (logits.empty()) throw std::invalid_argument("empty logits");
  std::vector<double> z(logits.begin(), logits.end());
  for (double v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("logits must be finite");

  // Each seen token is penalized once, however often it repeats.
  std::unordered_set<int> seen(history.begin(), history.end());
  for (int id : seen) {
    if (id < 0 || static_cast<std::size_t>(id) >= z.size()) continue;
    double& v = z[static_cast<std::size_t>(id)];
    v = v > 0.0 ? v / cfg.repetition_penalty : v * cfg.repetition_penalty;
  }

  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp((z[i] - mx) / cfg.temperature);
    sum += p[i];
  }
  for (double& v : p) v /= sum;

  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < order.size()) {
    mass += p[order[keep++]];
    if (mass >= cfg.top_p) break;
  }
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t r = 0; r < keep; ++r) out[order[r]] = p[order[r]] / mass;
  return out;
}

int sample_token(std::span<const double> logits, std::span<const int> history,
                 const SamplerConfig& cfg, std::mt19937_64& rng) {
  const auto p = nucleus_distribution(logits, history, cfg);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    last = static_cast<int>(i);
    acc += p[i];
    if (u < acc) return last;
  }
  return last;
}

TokenSampler::TokenSampler(const SamplerConfig& cfg, std::uint64_t stream) : cfg_(cfg) {
  cfg_.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  rng_.seed(seq);
}

int TokenSampler::sample(std::span<const double> logits, std::span<const int> history) {
  return sample_token(logits, history, cfg_, rng_);
}

}  // namespace omni
