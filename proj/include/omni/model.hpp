#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "omni/autograd.hpp"
#include "omni/masks.hpp"
#include "omni/sequencer.hpp"
#include "omni/tmrope.hpp"

namespace omni {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ModelDims {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t head_dim = 16;
  std::size_t ffn_hidden = 128;
  std::size_t n_layers_thinker = 2;
  std::size_t n_layers_talker = 2;
  std::size_t text_vocab = 256;
  std::size_t speech_vocab = 128;

  void validate() const;
  /// Last text id doubles as end-of-text.
  int text_end_id() const { return static_cast<int>(text_vocab) - 1; }
  /// Last speech id doubles as end-of-speech.
  int speech_end_id() const { return static_cast<int>(speech_vocab) - 1; }
};

template <class T>
struct DecoderLayerT {
  T attn_norm, wq, wk, wv, wo;
  T mlp_norm, w_gate, w_up, w_down;
};

template <class T>
struct WeightsT {
  T text_embed;  // text_vocab x d_model, shared by Thinker input and Talker
  std::vector<DecoderLayerT<T>> thinker;
  T thinker_norm, text_head;
  std::vector<DecoderLayerT<T>> talker;
  T talker_norm, speech_head;
};

/// Calls f(name, a, b) for every pair of corresponding tensors.
template <class WA, class WB, class F>
void zip_tensors(WA& a, WB& b, F&& f) {
  auto layers = [&](const char* stack, auto& la, auto& lb) {
    for (std::size_t i = 0; i < la.size(); ++i) {
      const std::string p = std::string(stack) + "." + std::to_string(i) + ".";
      f(p + "attn_norm", la[i].attn_norm, lb[i].attn_norm);
      f(p + "wq", la[i].wq, lb[i].wq);
      f(p + "wk", la[i].wk, lb[i].wk);
      f(p + "wv", la[i].wv, lb[i].wv);
      f(p + "wo", la[i].wo, lb[i].wo);
      f(p + "mlp_norm", la[i].mlp_norm, lb[i].mlp_norm);
      f(p + "w_gate", la[i].w_gate, lb[i].w_gate);
      f(p + "w_up", la[i].w_up, lb[i].w_up);
      f(p + "w_down", la[i].w_down, lb[i].w_down);
    }
  };
  f(std::string("text_embed"), a.text_embed, b.text_embed);
  layers("thinker", a.thinker, b.thinker);
  f(std::string("thinker_norm"), a.thinker_norm, b.thinker_norm);
  f(std::string("text_head"), a.text_head, b.text_head);
  layers("talker", a.talker, b.talker);
  f(std::string("talker_norm"), a.talker_norm, b.talker_norm);
  f(std::string("speech_head"), a.speech_head, b.speech_head);
}

struct ModelParams {
  ModelDims dims;
  RopeConfig rope;
  WeightsT<Matrix> weights;

  /// Projections drawn from a seeded uniform(-0.05, 0.05); norm gains are 1.
  static ModelParams init(const ModelDims& dims, const RopeConfig& rope, std::uint64_t seed);
  static ModelParams init(const ModelDims& dims, std::uint64_t seed);

  void validate() const;
  /// Same structure with every tensor zeroed.
  WeightsT<Matrix> zeros_like() const;
};

struct ThinkerOutput {
  Matrix hidden;  // n x d_model, after the final norm
  Matrix logits;  // n x text_vocab
};

struct TalkerInput {
  Vector thinker_hidden;
  Vector text_embed;

  /// Elementwise sum of the two streams.
  Vector combined() const;
};

struct LayerKv {
  Matrix keys;  // rotated
  Matrix values;
};

/// Per-layer key/value rows of everything processed so far.
struct KvCache {
  std::vector<LayerKv> layers;
  std::size_t length = 0;

  explicit KvCache(std::size_t n_layers = 0, std::size_t width = 0);
};

ThinkerOutput thinker_forward(const PackedSequence& packed, const Matrix& embeddings,
                              const ModelParams& params, const AttentionMask& mask);

/// Incremental causal Thinker for chunked prefill and token-by-token decoding.
class ThinkerSession {
 public:
  explicit ThinkerSession(const ModelParams& params);

  /// Processes `embeddings` rows at `positions` after everything seen so far.
  ThinkerOutput extend(std::span<const PositionTriple> positions, const Matrix& embeddings);
  /// Runs a whole prompt through extend() in `chunk_len` pieces.
  ThinkerOutput prefill(std::span<const PositionTriple> positions, const Matrix& embeddings,
                        std::size_t chunk_len);

  std::size_t length() const { return cache_.length; }

 private:
  const ModelParams* params_;
  KvCache cache_;
};

/// Dual-track Talker decoding state: the causal context of combined inputs.
struct TalkerState {
  KvCache cache;

  explicit TalkerState(const ModelParams& params);
  std::size_t context_length() const { return cache.length; }
};

/// Appends one combined input to the Talker context and returns speech logits.
Vector talker_step(TalkerState& state, const TalkerInput& input, const ModelParams& params);

Vector text_embedding(const ModelParams& params, int token);

/// Deterministic stand-in for the modality encoders: text rows come from the
/// embedding table (token ids drawn from `seed`), other rows are uniform noise.
Matrix toy_embeddings(const PackedSequence& packed, const ModelParams& params,
                      std::uint64_t seed);

// Training-side API, used for gradient checks.

struct TrainingExample {
  PackedSequence packed;
  Matrix embeddings;               // n x d_model
  std::vector<int> text_targets;   // n; also the tokens the Talker sees
  std::vector<int> speech_targets; // n
};

enum class LossKind {
  Thinker,  // text cross-entropy
  Talker,   // speech cross-entropy with Thinker hidden states held fixed
  Joint,    // both, with speech gradients flowing back into the Thinker
};

double loss_value(const ModelParams& params, const TrainingExample& ex, LossKind kind);
/// Returns the loss and writes d loss / d weight into `grads`.
double loss_and_gradients(const ModelParams& params, const TrainingExample& ex, LossKind kind,
                          WeightsT<Matrix>& grads);

TrainingExample random_example(const ModelParams& params, std::size_t n, std::uint64_t seed);

}  // namespace omni
