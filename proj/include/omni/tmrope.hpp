#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "omni/sequencer.hpp"

namespace omni {

enum class RopeComponent { Temporal = 0, Height = 1, Width = 2 };

/// Channel layout of the three-component rotary embedding.
///
/// `split` counts rotary pairs (two channels each) per component; pairs are
/// laid out as contiguous t, h, w blocks. Pair j always rotates at the
/// classic 1-D frequency theta_base^(-2j / head_dim), which is what makes
/// equal-component positions reduce exactly to 1-D RoPE.
struct RopeConfig {
  std::size_t head_dim = 16;
  std::array<std::size_t, 3> split{4, 2, 2};
  double theta_base = 10000.0;

  /// 2:1:1 split of head_dim / 2, remainder going to the temporal block.
  static RopeConfig with_default_split(std::size_t head_dim, double theta_base = 10000.0);

  std::size_t pairs() const { return head_dim / 2; }
  RopeComponent component_of(std::size_t pair) const;
  double frequency(std::size_t pair) const;
  void validate() const;
};

/// Per-token rotation angles, row-major tokens x pairs.
class RotationPlan {
 public:
  RotationPlan() = default;
  RotationPlan(std::size_t tokens, std::size_t pairs);

  std::size_t tokens() const { return tokens_; }
  std::size_t pairs() const { return pairs_; }
  std::span<const double> row(std::size_t token) const;
  std::span<double> row(std::size_t token);

 private:
  std::size_t tokens_ = 0;
  std::size_t pairs_ = 0;
  std::vector<double> angles_;
};

RotationPlan build_plan(std::span<const PositionTriple> triples, const RopeConfig& cfg);

/// Classic single-component schedule, used as the reference for 1-D reduction.
RotationPlan build_1d_plan(std::span<const std::int64_t> positions, std::size_t head_dim,
                           double theta_base = 10000.0);

/// Rotates channel pairs (2j, 2j+1) by angles[j].
std::vector<double> apply_rotary(std::span<const double> vec, std::span<const double> angles);
void apply_rotary_inplace(std::span<double> vec, std::span<const double> angles);

double attention_score(std::span<const double> q, std::span<const double> k,
                       const PositionTriple& pq, const PositionTriple& pk,
                       const RopeConfig& cfg);

void write_plan_csv(std::ostream& os, const RotationPlan& plan, const RopeConfig& cfg);

}  // namespace omni
