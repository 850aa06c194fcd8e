#include "omni/tmrope.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace omni {

RopeConfig RopeConfig::with_default_split(std::size_t head_dim, double theta_base) {
  RopeConfig cfg;
  cfg.head_dim = head_dim;
  cfg.theta_base = theta_base;
  const std::size_t pairs = head_dim / 2;
  const std::size_t quarter = pairs / 4;
  cfg.split = {pairs - 2 * quarter, quarter, quarter};
  cfg.validate();
  return cfg;
}

void RopeConfig::validate() const {
  if (head_dim == 0 || head_dim % 2 != 0)
    throw std::invalid_argument("head_dim must be even and positive");
  if (split[0] + split[1] + split[2] != pairs())
    throw std::invalid_argument("rope split must sum to head_dim / 2");
  if (!(theta_base > 0.0)) throw std::invalid_argument("theta_base must be positive");
}

RopeComponent RopeConfig::component_of(std::size_t pair) const {
  if (pair < split[0]) return RopeComponent::Temporal;
  if (pair < split[0] + split[1]) return RopeComponent::Height;
  return RopeComponent::Width;
}

double RopeConfig::frequency(std::size_t pair) const {
  return std::pow(theta_base, -2.0 * static_cast<double>(pair) / static_cast<double>(head_dim));
}

RotationPlan::RotationPlan(std::size_t tokens, std::size_t pairs)
    : tokens_(tokens), pairs_(pairs), angles_(tokens * pairs, 0.0) {}

std::span<const double> RotationPlan::row(std::size_t token) const {
  return std::span<const double>(angles_).subspan(token * pairs_, pairs_);
}

std::span<double> RotationPlan::row(std::size_t token) {
  return std::span<double>(angles_).subspan(token * pairs_, pairs_);
}

RotationPlan build_plan(std::span<const PositionTriple> triples, const RopeConfig& cfg) {
  cfg.validate();
  RotationPlan plan(triples.size(), cfg.pairs());
  std::vector<double> freq(cfg.pairs());
  std::vector<RopeComponent> comp(cfg.pairs());
  for (std::size_t j = 0; j < cfg.pairs(); ++j) {
    freq[j] = cfg.frequency(j);
    comp[j] = cfg.component_of(j);
  }
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& p = triples[i];
    const std::array<std::int64_t, 3> ids{p.t, p.h, p.w};
    auto row = plan.row(i);
    for (std::size_t j = 0; j < cfg.pairs(); ++j)
      row[j] = static_cast<double>(ids[static_cast<std::size_t>(comp[j])]) * freq[j];
  }
  return plan;
}

RotationPlan build_1d_plan(std::span<const std::int64_t> positions, std::size_t head_dim,
                           double theta_base) {
  if (head_dim == 0 || head_dim % 2 != 0)
    throw std::invalid_argument("head_dim must be even and positive");
  const std::size_t pairs = head_dim / 2;
  RotationPlan plan(positions.size(), pairs);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto row = plan.row(i);
    for (std::size_t j = 0; j < pairs; ++j)
      row[j] = static_cast<double>(positions[i]) *
               std::pow(theta_base, -2.0 * static_cast<double>(j) / static_cast<double>(head_dim));
  }
  return plan;
}

void apply_rotary_inplace(std::span<double> vec, std::span<const double> angles) {
  if (vec.size() != 2 * angles.size())
    throw std::invalid_argument("vector length must be twice the number of rotary pairs");
  for (std::size_t j = 0; j < angles.size(); ++j) {
    const double c = std::cos(angles[j]);
    const double s = std::sin(angles[j]);
    const double x0 = vec[2 * j];
    const double x1 = vec[2 * j + 1];
    vec[2 * j] = x0 * c - x1 * s;
    vec[2 * j + 1] = x0 * s + x1 * c;
  }
}

std::vector<double> apply_rotary(std::span<const double> vec, std::span<const double> angles) {
  std::vector<double> out(vec.begin(), vec.end());
  apply_rotary_inplace(out, angles);
  return out;
}

double attention_score(std::span<const double> q, std::span<const double> k,
                       const PositionTriple& pq, const PositionTriple& pk,
                       const RopeConfig& cfg) {
  if (q.size() != cfg.head_dim || k.size() != cfg.head_dim)
    throw std::invalid_argument("q and k must have head_dim entries");
  const PositionTriple both[2] = {pq, pk};
  const RotationPlan plan = build_plan(both, cfg);
  const auto rq = apply_rotary(q, plan.row(0));
  const auto rk = apply_rotary(k, plan.row(1));
  double dot = 0.0;
  for (std::size_t i = 0; i < rq.size(); ++i) dot += rq[i] * rk[i];
  return dot;
}

void write_plan_csv(std::ostream& os, const RotationPlan& plan, const RopeConfig& cfg) {
  static constexpr const char* kNames[] = {"t", "h", "w"};
  os << "token,pair,component,angle\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < plan.tokens(); ++i) {
    auto row = plan.row(i);
    for (std::size_t j = 0; j < plan.pairs(); ++j)
      os << i << ',' << j << ',' << kNames[static_cast<int>(cfg.component_of(j))] << ','
         << row[j] << '\n';
  }
  os.precision(old);
}

}  // namespace omni
