#include "omni/model.hpp"

#include <random>
#include <stdexcept>

namespace omni {

using ag::MaskView;
using ag::Tape;
using ag::Var;

void ModelDims::validate() const {
  if (d_model == 0 || n_heads == 0 || head_dim == 0 || ffn_hidden == 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (d_model != n_heads * head_dim)
    throw std::invalid_argument("d_model must equal n_heads x head_dim");
  if (n_layers_thinker == 0 || n_layers_talker == 0)
    throw std::invalid_argument("both stacks need at least one layer");
  if (text_vocab < 2 || speech_vocab < 2)
    throw std::invalid_argument("vocabularies need at least two entries");
}

namespace {

template <class T>
void resize_stacks(WeightsT<T>& w, const ModelDims& d) {
  w.thinker.resize(d.n_layers_thinker);
  w.talker.resize(d.n_layers_talker);
}

void shape(WeightsT<Matrix>& w, const ModelDims& d) {
  resize_stacks(w, d);
  const auto dm = static_cast<Eigen::Index>(d.d_model);
  const auto ff = static_cast<Eigen::Index>(d.ffn_hidden);
  auto layer = [&](DecoderLayerT<Matrix>& l) {
    l.attn_norm = Matrix::Ones(1, dm);
    l.mlp_norm = Matrix::Ones(1, dm);
    l.wq.resize(dm, dm);
    l.wk.resize(dm, dm);
    l.wv.resize(dm, dm);
    l.wo.resize(dm, dm);
    l.w_gate.resize(dm, ff);
    l.w_up.resize(dm, ff);
    l.w_down.resize(ff, dm);
  };
  for (auto& l : w.thinker) layer(l);
  for (auto& l : w.talker) layer(l);
  w.text_embed.resize(static_cast<Eigen::Index>(d.text_vocab), dm);
  w.thinker_norm = Matrix::Ones(1, dm);
  w.text_head.resize(dm, static_cast<Eigen::Index>(d.text_vocab));
  w.talker_norm = Matrix::Ones(1, dm);
  w.speech_head.resize(dm, static_cast<Eigen::Index>(d.speech_vocab));
}

bool is_norm(const std::string& name) { return name.ends_with("norm"); }

WeightsT<Var> bind(Tape& tape, const WeightsT<Matrix>& w, bool requires_grad) {
  WeightsT<Var> out;
  out.thinker.resize(w.thinker.size());
  out.talker.resize(w.talker.size());
  zip_tensors(w, out, [&](const std::string&, const Matrix& m, Var& v) {
    v = tape.leaf(m, requires_grad);
  });
  return out;
}

Var decoder_stack(Tape& tape, const std::vector<DecoderLayerT<Var>>& layers, Var x,
                  const RotationPlan& plan, MaskView mask, KvCache* cache,
                  const ModelDims& d) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const Var h = ag::rms_norm(x, L.attn_norm);
    const Var q = ag::rotary(ag::matmul(h, L.wq), plan, d.n_heads, d.head_dim);
    Var keys = ag::rotary(ag::matmul(h, L.wk), plan, d.n_heads, d.head_dim);
    Var values = ag::matmul(h, L.wv);
    if (cache) {
      LayerKv& kv = cache->layers[l];
      keys = ag::vstack(tape.constant(kv.keys), keys);
      values = ag::vstack(tape.constant(kv.values), values);
      kv.keys = keys.value();
      kv.values = values.value();
    }
    const Var attn = ag::attention(q, keys, values, mask, d.n_heads, d.head_dim);
    x = ag::add(x, ag::matmul(attn, L.wo));
    const Var m = ag::rms_norm(x, L.mlp_norm);
    const Var gated = ag::mul(ag::silu(ag::matmul(m, L.w_gate)), ag::matmul(m, L.w_up));
    x = ag::add(x, ag::matmul(gated, L.w_down));
  }
  if (cache) cache->length += static_cast<std::size_t>(x.rows());
  return x;
}

std::vector<PositionTriple> linear_positions(std::size_t begin, std::size_t n) {
  std::vector<PositionTriple> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<std::int64_t>(begin + i);
    out.push_back({p, p, p});
  }
  return out;
}

void check_embeddings(const Matrix& e, std::size_t rows, const ModelDims& d) {
  if (static_cast<std::size_t>(e.rows()) != rows ||
      static_cast<std::size_t>(e.cols()) != d.d_model)
    throw std::invalid_argument("embeddings must be n x d_model");
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, const RopeConfig& rope,
                              std::uint64_t seed) {
  ModelParams p;
  p.dims = dims;
  p.rope = rope;
  dims.validate();
  shape(p.weights, dims);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  zip_tensors(p.weights, p.weights, [&](const std::string& name, Matrix& m, Matrix&) {
    if (is_norm(name)) return;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  });
  p.validate();
  return p;
}

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
  return init(dims, RopeConfig::with_default_split(dims.head_dim), seed);
}

void ModelParams::validate() const {
  dims.validate();
  rope.validate();
  if (rope.head_dim != dims.head_dim) throw std::invalid_argument("rope head_dim mismatch");
  if (weights.thinker.size() != dims.n_layers_thinker ||
      weights.talker.size() != dims.n_layers_talker)
    throw std::invalid_argument("layer count mismatch");
  WeightsT<Matrix> expected;
  shape(expected, dims);
  zip_tensors(weights, expected, [](const std::string& name, const Matrix& m, const Matrix& e) {
    if (m.rows() != e.rows() || m.cols() != e.cols())
      throw std::invalid_argument("tensor " + name + " has the wrong shape");
    if (!m.allFinite()) throw std::invalid_argument("tensor " + name + " is not finite");
  });
}

WeightsT<Matrix> ModelParams::zeros_like() const {
  WeightsT<Matrix> z;
  shape(z, dims);
  zip_tensors(z, z, [](const std::string&, Matrix& m, Matrix&) { m.setZero(); });
  return z;
}

Vector TalkerInput::combined() const {
  if (thinker_hidden.size() != text_embed.size())
    throw std::invalid_argument("talker input streams differ in width");
  return thinker_hidden + text_embed;
}

KvCache::KvCache(std::size_t n_layers, std::size_t width) : layers(n_layers) {
  for (auto& l : layers) {
    l.keys.resize(0, static_cast<Eigen::Index>(width));
    l.values.resize(0, static_cast<Eigen::Index>(width));
  }
}

ThinkerOutput thinker_forward(const PackedSequence& packed, const Matrix& embeddings,
                              const ModelParams& params, const AttentionMask& mask) {
  const auto& d = params.dims;
  check_embeddings(embeddings, packed.size(), d);
  if (mask.size() != packed.size()) throw std::invalid_argument("mask must be n x n");
  if (packed.size() == 0) throw std::invalid_argument("thinker_forward needs input");
  Tape tape(false);
  const auto w = bind(tape, params.weights, false);
  const auto triples = packed.triples();
  const RotationPlan plan = build_plan(triples, params.rope);
  const Var x = tape.leaf(embeddings, false);
  const Var h = ag::rms_norm(decoder_stack(tape, w.thinker, x, plan, {&mask, 0}, nullptr, d),
                             w.thinker_norm);
  const Var logits = ag::matmul(h, w.text_head);
  return {h.value(), logits.value()};
}

ThinkerSession::ThinkerSession(const ModelParams& params)
    : params_(&params), cache_(params.dims.n_layers_thinker, params.dims.d_model) {}

ThinkerOutput ThinkerSession::extend(std::span<const PositionTriple> positions,
                                     const Matrix& embeddings) {
  const auto& d = params_->dims;
  check_embeddings(embeddings, positions.size(), d);
  if (positions.empty()) throw std::invalid_argument("extend needs at least one row");
  Tape tape(false);
  const auto w = bind(tape, params_->weights, false);
  const RotationPlan plan = build_plan(positions, params_->rope);
  const Var x = tape.leaf(embeddings, false);
  const MaskView causal{nullptr, cache_.length};
  const Var h =
      ag::rms_norm(decoder_stack(tape, w.thinker, x, plan, causal, &cache_, d), w.thinker_norm);
  const Var logits = ag::matmul(h, w.text_head);
  return {h.value(), logits.value()};
}

ThinkerOutput ThinkerSession::prefill(std::span<const PositionTriple> positions,
                                      const Matrix& embeddings, std::size_t chunk_len) {
  check_embeddings(embeddings, positions.size(), params_->dims);
  ThinkerOutput all;
  all.hidden.resize(embeddings.rows(), embeddings.cols());
  all.logits.resize(embeddings.rows(), static_cast<Eigen::Index>(params_->dims.text_vocab));
  for (const auto& [b, e] : prefill_plan(positions.size(), chunk_len)) {
    const auto rb = static_cast<Eigen::Index>(b);
    const auto rn = static_cast<Eigen::Index>(e - b);
    auto out = extend(positions.subspan(b, e - b), embeddings.middleRows(rb, rn));
    all.hidden.middleRows(rb, rn) = out.hidden;
    all.logits.middleRows(rb, rn) = out.logits;
  }
  return all;
}

TalkerState::TalkerState(const ModelParams& params)
    : cache(params.dims.n_layers_talker, params.dims.d_model) {}

Vector talker_step(TalkerState& state, const TalkerInput& input, const ModelParams& params) {
  const auto& d = params.dims;
  if (static_cast<std::size_t>(input.thinker_hidden.size()) != d.d_model ||
      static_cast<std::size_t>(input.text_embed.size()) != d.d_model)
    throw std::invalid_argument("talker input must have d_model entries");
  if (state.cache.layers.size() != d.n_layers_talker)
    throw std::invalid_argument("talker state does not match params");
  Tape tape(false);
  const auto w = bind(tape, params.weights, false);
  const auto pos = linear_positions(state.cache.length, 1);
  const RotationPlan plan = build_plan(pos, params.rope);
  const Var x = tape.constant(input.combined().transpose());
  const MaskView causal{nullptr, state.cache.length};
  const Var h = ag::rms_norm(decoder_stack(tape, w.talker, x, plan, causal, &state.cache, d),
                             w.talker_norm);
  return ag::matmul(h, w.speech_head).value().row(0).transpose();
}

Vector text_embedding(const ModelParams& params, int token) {
  if (token < 0 || static_cast<std::size_t>(token) >= params.dims.text_vocab)
    throw std::out_of_range("text token out of range");
  return params.weights.text_embed.row(token).transpose();
}

Matrix toy_embeddings(const PackedSequence& packed, const ModelParams& params,
                      std::uint64_t seed) {
  const auto& d = params.dims;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> token(0, d.text_end_id() - 1);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  Matrix e(static_cast<Eigen::Index>(packed.size()), static_cast<Eigen::Index>(d.d_model));
  for (std::size_t i = 0; i < packed.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (packed.elements[i].kind == Modality::Text) {
      e.row(r) = params.weights.text_embed.row(token(rng));
    } else {
      for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) = noise(rng);
    }
  }
  return e;
}

namespace {

Var build_loss(Tape& tape, const WeightsT<Var>& w, const ModelParams& params,
               const TrainingExample& ex, LossKind kind) {
  const auto& d = params.dims;
  const std::size_t n = ex.packed.size();
  check_embeddings(ex.embeddings, n, d);
  if (ex.text_targets.size() != n || ex.speech_targets.size() != n)
    throw std::invalid_argument("training targets must have one entry per element");

  const auto triples = ex.packed.triples();
  const RotationPlan plan = build_plan(triples, params.rope);
  const Var x = tape.leaf(ex.embeddings, false);
  const Var hidden = ag::rms_norm(decoder_stack(tape, w.thinker, x, plan, {}, nullptr, d),
                                  w.thinker_norm);
  const Var text_loss = ag::cross_entropy(ag::matmul(hidden, w.text_head), ex.text_targets);
  if (kind == LossKind::Thinker) return text_loss;

  const Var talker_hidden = kind == LossKind::Talker ? tape.constant(hidden.value()) : hidden;
  const Var talker_in = ag::add(talker_hidden, ag::embedding(w.text_embed, ex.text_targets));
  const RotationPlan talker_plan = build_plan(linear_positions(0, n), params.rope);
  const Var th = ag::rms_norm(
      decoder_stack(tape, w.talker, talker_in, talker_plan, {}, nullptr, d), w.talker_norm);
  const Var speech_loss = ag::cross_entropy(ag::matmul(th, w.speech_head), ex.speech_targets);
  if (kind == LossKind::Talker) return speech_loss;
  return ag::add(text_loss, speech_loss);
}

}  // namespace

double loss_value(const ModelParams& params, const TrainingExample& ex, LossKind kind) {
  Tape tape(false);
  const auto w = bind(tape, params.weights, false);
  return build_loss(tape, w, params, ex, kind).value()(0, 0);
}

double loss_and_gradients(const ModelParams& params, const TrainingExample& ex, LossKind kind,
                          WeightsT<Matrix>& grads) {
  Tape tape(true);
  const auto w = bind(tape, params.weights, true);
  const Var loss = build_loss(tape, w, params, ex, kind);
  tape.backward(loss);
  grads = params.zeros_like();
  zip_tensors(grads, w, [&](const std::string&, Matrix& g, const Var& v) {
    const Matrix& tg = tape.grad(v);
    if (tg.size() != 0) g = tg;
  });
  return loss.value()(0, 0);
}

TrainingExample random_example(const ModelParams& params, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("example needs at least one element");
  std::vector<ModalitySegment> segs;
  if (n >= 6) {
    const auto rest = static_cast<std::int64_t>(n) - 4;
    segs = {ModalitySegment::text(rest / 2), ModalitySegment::image(2, 2),
            ModalitySegment::audio(rest - rest / 2)};
  } else {
    segs = {ModalitySegment::text(static_cast<std::int64_t>(n))};
  }
  TrainingExample ex;
  ex.packed = pack_sequence(segs);
  std::mt19937_64 rng(seed);
  ex.embeddings = toy_embeddings(ex.packed, params, rng());
  std::uniform_int_distribution<int> text(0, params.dims.text_end_id());
  std::uniform_int_distribution<int> speech(0, params.dims.speech_end_id());
  for (std::size_t i = 0; i < n; ++i) {
    ex.text_targets.push_back(text(rng));
    ex.speech_targets.push_back(speech(rng));
  }
  return ex;
}

}  // namespace omni
