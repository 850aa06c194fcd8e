#include "omni/preference.hpp"

#include <cmath>

namespace omni {

double DpoTriplet::margin() const { return (lp_policy_w - lp_ref_w) - (lp_policy_l - lp_ref_l); }

double sequence_logprob(const Eigen::MatrixXd& logits, std::span<const int> tokens) {
  if (static_cast<std::size_t>(logits.rows()) != tokens.size())
    throw std::invalid_argument("one logit row per token is required");
  double total = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const int y = tokens[static_cast<std::size_t>(t)];
    if (y < 0 || y >= logits.cols()) throw std::out_of_range("token outside the vocabulary");
    const double mx = logits.row(t).maxCoeff();
    const double lse = mx + std::log((logits.row(t).array() - mx).exp().sum());
    total += logits(t, y) - lse;
  }
  return total;
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_beta(const DpoTriplet& t) {
  if (!(t.beta > 0.0)) throw std::invalid_argument("beta must be positive");
}

}  // namespace

double dpo_loss(const DpoTriplet& t) {
  check_beta(t);
  return softplus(-t.beta * t.margin());
}

DpoGradient dpo_gradient(const DpoTriplet& t) {
  check_beta(t);
  // d/dz softplus(-z) = -sigmoid(-z), z = beta * margin.
  const double g = -sigmoid(-t.beta * t.margin()) * t.beta;
  return {g, -g, -g, g};
}

}  // namespace omni
