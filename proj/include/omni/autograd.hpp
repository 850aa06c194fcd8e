#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "omni/masks.hpp"
#include "omni/tmrope.hpp"

namespace omni::ag {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Records matrix operations for reverse-mode differentiation.
///
/// With `record == false` the tape only evaluates: no backward closures are
/// kept and no gradients are allocated.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m);
  /// Non-owning leaf; `m` must outlive the tape.
  Var leaf(const Matrix& m, bool requires_grad);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() target; zero-sized if none reached `v`.
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }

  void backward(Var scalar);

  // Used by op implementations.
  Var push(Matrix value, bool needs_grad, std::function<void(const Matrix&)> backward);
  void accumulate(Var v, const Matrix& g);
  bool recording() const { return record_; }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(const Matrix&)> backward;
  };
  bool record_;
  std::deque<Node> nodes_;
};

/// Allowed-key predicate for a block of queries that starts at `row_offset`
/// in the full sequence. With no mask, attention is causal.
struct MaskView {
  const AttentionMask* mask = nullptr;
  std::size_t row_offset = 0;

  bool allowed(std::size_t q, std::size_t k) const {
    return mask ? mask->allowed(row_offset + q, k) : k <= row_offset + q;
  }
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var silu(Var a);
/// Row-wise RMS normalization with a 1 x d gain.
Var rms_norm(Var x, Var gain, double eps = 1e-6);
/// Rotates each head's channel pairs by the plan row of its token.
Var rotary(Var x, const RotationPlan& plan, std::size_t n_heads, std::size_t head_dim);
/// Multi-head scaled dot-product attention with per-entry masking.
Var attention(Var q, Var k, Var v, MaskView mask, std::size_t n_heads, std::size_t head_dim);
Var embedding(Var table, std::span<const int> ids);
Var vstack(Var top, Var bottom);
Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
/// Mean token cross-entropy, returned as a 1 x 1 matrix.
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace omni::ag
