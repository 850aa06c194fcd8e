#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace omni {

/// Sequence log-probabilities of a preferred (w) and dispreferred (l) sample
/// under the policy and the frozen reference.
struct DpoTriplet {
  double lp_policy_w = 0.0;
  double lp_policy_l = 0.0;
  double lp_ref_w = 0.0;
  double lp_ref_l = 0.0;
  double beta = 0.1;

  /// (policy_w - ref_w) - (policy_l - ref_l), before scaling by beta.
  double margin() const;
};

struct DpoGradient {
  double d_policy_w = 0.0;
  double d_policy_l = 0.0;
  double d_ref_w = 0.0;
  double d_ref_l = 0.0;
};

/// Sum over steps of log softmax(logits[t])[tokens[t]]; logits is steps x vocab.
double sequence_logprob(const Eigen::MatrixXd& logits, std::span<const int> tokens);

/// -log sigmoid(beta * margin), evaluated without overflow for any margin.
double dpo_loss(const DpoTriplet& t);
DpoGradient dpo_gradient(const DpoTriplet& t);

template <class Sequence>
struct RankedPair {
  std::size_t winner = 0;
  std::size_t loser = 0;
  Sequence chosen;
  Sequence rejected;
};

/// Highest reward wins, lowest loses; ties go to the lower index.
template <class Sequence>
RankedPair<Sequence> rank_candidates(const std::vector<std::pair<Sequence, double>>& candidates) {
  if (candidates.size() < 2) throw std::invalid_argument("ranking needs at least two candidates");
  std::size_t best = 0;
  std::size_t worst = 1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].second > candidates[best].second) best = i;
  }
  // The loser is the lowest-index minimum among the remaining candidates.
  worst = best == 0 ? 1 : 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i == best) continue;
    if (candidates[i].second < candidates[worst].second) worst = i;
  }
  return {best, worst, candidates[best].first, candidates[worst].first};
}

}  // namespace omni
