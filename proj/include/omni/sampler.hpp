#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace omni {

struct SamplerConfig {
  double top_p = 0.9;
  double repetition_penalty = 1.1;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Penalized, temperature-scaled, nucleus-truncated distribution over the
/// vocabulary. Entries outside the nucleus are exactly zero; the rest sum to 1.
std::vector<double> nucleus_distribution(std::span<const double> logits,
                                         std::span<const int> history,
                                         const SamplerConfig& cfg);

/// A seeded categorical draw from nucleus_distribution().
int sample_token(std::span<const double> logits, std::span<const int> history,
                 const SamplerConfig& cfg, std::mt19937_64& rng);

/// Owns the random stream of one generation track.
class TokenSampler {
 public:
  explicit TokenSampler(const SamplerConfig& cfg, std::uint64_t stream = 0);

  int sample(std::span<const double> logits, std::span<const int> history);
  const SamplerConfig& config() const { return cfg_; }

 private:
  SamplerConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace omni
