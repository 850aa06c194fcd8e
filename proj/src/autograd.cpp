#include "omni/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace omni::ag {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix m) {
  nodes_.push_back(Node{std::move(m), nullptr, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(const Matrix& m, bool requires_grad) {
  nodes_.push_back(Node{{}, &m, {}, record_ && requires_grad, {}});
  return {this, nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ref ? *n.ref : n.owned;
}

const Matrix& Tape::grad(Var v) const { return nodes_[v.id].grad; }

Var Tape::push(Matrix value, bool needs_grad, std::function<void(const Matrix&)> backward) {
  const bool keep = record_ && needs_grad;
  nodes_.push_back(Node{std::move(value), nullptr, {}, keep, keep ? std::move(backward) : nullptr});
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var scalar) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  const Matrix& out = value(scalar);
  if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("backward needs a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(scalar, Matrix::Ones(1, 1));
  for (std::size_t i = scalar.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) {
      const Matrix g = n.grad;
      n.backward(g);
    }
  }
}

namespace {

bool any_grad(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.tape->requires_grad(v)) return true;
  return false;
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("vars live on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul shape mismatch");
  Tape* t = a.tape;
  return t->push(a.value() * b.value(), any_grad({a, b}), [t, a, b](const Matrix& g) {
    if (t->requires_grad(a)) t->accumulate(a, g * b.value().transpose());
    if (t->requires_grad(b)) t->accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("add shape mismatch");
  Tape* t = a.tape;
  return t->push(a.value() + b.value(), any_grad({a, b}), [t, a, b](const Matrix& g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("mul shape mismatch");
  Tape* t = a.tape;
  return t->push(a.value().cwiseProduct(b.value()), any_grad({a, b}),
                 [t, a, b](const Matrix& g) {
                   if (t->requires_grad(a)) t->accumulate(a, g.cwiseProduct(b.value()));
                   if (t->requires_grad(b)) t->accumulate(b, g.cwiseProduct(a.value()));
                 });
}

Var silu(Var a) {
  Tape* t = a.tape;
  const Matrix& x = a.value();
  const Matrix sig = (1.0 + (-x.array()).exp()).inverse().matrix();
  Matrix y = x.cwiseProduct(sig);
  return t->push(std::move(y), any_grad({a}), [t, a, sig](const Matrix& g) {
    const auto& x = a.value().array();
    const auto s = sig.array();
    t->accumulate(a, (g.array() * (s * (1.0 + x * (1.0 - s)))).matrix());
  });
}

Var rms_norm(Var x, Var gain, double eps) {
  same_tape(x, gain);
  if (gain.rows() != 1 || gain.cols() != x.cols())
    throw std::invalid_argument("rms_norm gain must be 1 x d");
  Tape* t = x.tape;
  const Matrix& xv = x.value();
  const double d = static_cast<double>(xv.cols());
  Eigen::VectorXd inv(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i)
    inv(i) = 1.0 / std::sqrt(xv.row(i).squaredNorm() / d + eps);
  Matrix normed = inv.asDiagonal() * xv;
  Matrix y = normed * gain.value().row(0).asDiagonal();
  return t->push(std::move(y), any_grad({x, gain}), [t, x, gain, inv, normed, d](const Matrix& g) {
    const Matrix& xv = x.value();
    if (t->requires_grad(gain)) t->accumulate(gain, g.cwiseProduct(normed).colwise().sum());
    if (t->requires_grad(x)) {
      const Matrix gg = g * gain.value().row(0).asDiagonal();
      Matrix dx(xv.rows(), xv.cols());
      for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const double r = inv(i);
        const double proj = gg.row(i).dot(xv.row(i));
        dx.row(i) = r * gg.row(i) - (r * r * r / d) * proj * xv.row(i);
      }
      t->accumulate(x, dx);
    }
  });
}

namespace {

void rotate_rows(Matrix& m, const RotationPlan& plan, std::size_t n_heads, std::size_t head_dim,
                 double sign) {
  const std::size_t pairs = head_dim / 2;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto angles = plan.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < pairs; ++j) {
      const double c = std::cos(angles[j]);
      const double s = sign * std::sin(angles[j]);
      for (std::size_t h = 0; h < n_heads; ++h) {
        const auto col = static_cast<Eigen::Index>(h * head_dim + 2 * j);
        const double x0 = m(i, col);
        const double x1 = m(i, col + 1);
        m(i, col) = x0 * c - x1 * s;
        m(i, col + 1) = x0 * s + x1 * c;
      }
    }
  }
}

}  // namespace

Var rotary(Var x, const RotationPlan& plan, std::size_t n_heads, std::size_t head_dim) {
  if (static_cast<std::size_t>(x.cols()) != n_heads * head_dim || head_dim % 2 != 0 ||
      plan.pairs() != head_dim / 2 || plan.tokens() != static_cast<std::size_t>(x.rows()))
    throw std::invalid_argument("rotary shape mismatch");
  Tape* t = x.tape;
  Matrix y = x.value();
  rotate_rows(y, plan, n_heads, head_dim, 1.0);
  return t->push(std::move(y), any_grad({x}), [t, x, plan, n_heads, head_dim](const Matrix& g) {
    Matrix dx = g;
    rotate_rows(dx, plan, n_heads, head_dim, -1.0);
    t->accumulate(x, dx);
  });
}

Var attention(Var q, Var k, Var v, MaskView mask, std::size_t n_heads, std::size_t head_dim) {
  same_tape(q, k);
  same_tape(q, v);
  const auto width = static_cast<Eigen::Index>(n_heads * head_dim);
  if (q.cols() != width || k.cols() != width || v.cols() != width || k.rows() != v.rows())
    throw std::invalid_argument("attention shape mismatch");
  if (mask.mask && (mask.row_offset + static_cast<std::size_t>(q.rows()) > mask.mask->size() ||
                    static_cast<std::size_t>(k.rows()) > mask.mask->size()))
    throw std::invalid_argument("attention mask is smaller than the inputs");

  Tape* t = q.tape;
  const Eigen::Index nq = q.rows();
  const Eigen::Index nk = k.rows();
  const auto hd = static_cast<Eigen::Index>(head_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<Matrix> probs(n_heads);
  Matrix out = Matrix::Zero(nq, width);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const auto c0 = static_cast<Eigen::Index>(h) * hd;
    Matrix s = (q.value().middleCols(c0, hd) * k.value().middleCols(c0, hd).transpose()) * scale;
    Matrix& p = probs[h];
    p = Matrix::Zero(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < nk; ++j)
        if (mask.allowed(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
          mx = std::max(mx, s(i, j));
      if (!std::isfinite(mx)) continue;
      double z = 0.0;
      for (Eigen::Index j = 0; j < nk; ++j)
        if (mask.allowed(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
          p(i, j) = std::exp(s(i, j) - mx);
          z += p(i, j);
        }
      p.row(i) /= z;
    }
    out.middleCols(c0, hd) = p * v.value().middleCols(c0, hd);
  }

  return t->push(std::move(out), any_grad({q, k, v}),
                 [t, q, k, v, probs = std::move(probs), hd, scale](const Matrix& g) {
                   Matrix dq = Matrix::Zero(q.rows(), q.cols());
                   Matrix dk = Matrix::Zero(k.rows(), k.cols());
                   Matrix dv = Matrix::Zero(v.rows(), v.cols());
                   for (std::size_t h = 0; h < probs.size(); ++h) {
                     const auto c0 = static_cast<Eigen::Index>(h) * hd;
                     const Matrix& p = probs[h];
                     const Matrix go = g.middleCols(c0, hd);
                     dv.middleCols(c0, hd) = p.transpose() * go;
                     const Matrix dp = go * v.value().middleCols(c0, hd).transpose();
                     const Eigen::VectorXd rowdot = (dp.cwiseProduct(p)).rowwise().sum();
                     const Matrix ds =
                         (p.array() * (dp.colwise() - rowdot).array()).matrix() * scale;
                     dq.middleCols(c0, hd) = ds * k.value().middleCols(c0, hd);
                     dk.middleCols(c0, hd) = ds.transpose() * q.value().middleCols(c0, hd);
                   }
                   t->accumulate(q, dq);
                   t->accumulate(k, dk);
                   t->accumulate(v, dv);
                 });
}

Var embedding(Var table, std::span<const int> ids) {
  Tape* t = table.tape;
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tv.rows()) throw std::out_of_range("embedding id out of range");
    out.row(static_cast<Eigen::Index>(r)) = tv.row(ids[r]);
  }
  std::vector<int> keep(ids.begin(), ids.end());
  return t->push(std::move(out), any_grad({table}), [t, table, keep](const Matrix& g) {
    Matrix d = Matrix::Zero(table.rows(), table.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) d.row(keep[r]) += g.row(static_cast<Eigen::Index>(r));
    t->accumulate(table, d);
  });
}

Var vstack(Var top, Var bottom) {
  same_tape(top, bottom);
  if (top.rows() == 0) return bottom;
  if (top.cols() != bottom.cols()) throw std::invalid_argument("vstack column mismatch");
  Tape* t = top.tape;
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top.value(), bottom.value();
  const Eigen::Index split = top.rows();
  return t->push(std::move(out), any_grad({top, bottom}), [t, top, bottom, split](const Matrix& g) {
    t->accumulate(top, g.topRows(split));
    t->accumulate(bottom, g.bottomRows(g.rows() - split));
  });
}

Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows())
    throw std::out_of_range("slice_rows out of range");
  Tape* t = a.tape;
  return t->push(a.value().middleRows(begin, count), any_grad({a}),
                 [t, a, begin, count](const Matrix& g) {
                   Matrix d = Matrix::Zero(a.rows(), a.cols());
                   d.middleRows(begin, count) = g;
                   t->accumulate(a, d);
                 });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  Tape* t = logits.tape;
  const Matrix& z = logits.value();
  if (static_cast<std::size_t>(z.rows()) != targets.size() || targets.empty())
    throw std::invalid_argument("cross_entropy needs one target per logit row");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z.cols()) throw std::out_of_range("cross_entropy target out of range");
    const double mx = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - mx).exp().matrix();
    const double sum = e.sum();
    probs.row(i) = e / sum;
    total += -(z(i, y) - mx - std::log(sum));
  }
  const double n = static_cast<double>(z.rows());
  std::vector<int> keep(targets.begin(), targets.end());
  return t->push(Matrix::Constant(1, 1, total / n), any_grad({logits}),
                 [t, logits, probs, keep, n](const Matrix& g) {
                   Matrix d = probs;
                   for (std::size_t i = 0; i < keep.size(); ++i) d(static_cast<Eigen::Index>(i), keep[i]) -= 1.0;
                   t->accumulate(logits, d * (g(0, 0) / n));
                 });
}

}  // namespace omni::ag
