#include "omni/codec.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace omni {

namespace {

void fill_uniform(Eigen::MatrixXd& m, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

struct CodeFeatures {
  Eigen::VectorXd embed, query, key, value;
};

CodeFeatures features(int code, const MelDecoderParams& p) {
  if (code < 0 || static_cast<std::size_t>(code) >= p.speech_vocab)
    throw std::out_of_range("speech code out of range");
  CodeFeatures f;
  f.embed = p.code_embed.row(code).transpose();
  f.query = p.wq * f.embed;
  f.key = p.wk * f.embed;
  f.value = p.wv * f.embed;
  return f;
}

// Decodes the codes of one query block against the keys of [lo, hi), skipping
// entries the window mask disallows. Offline and streaming paths both go
// through here, so their floating-point operations are identical.
std::vector<MelFrame> decode_rows(std::span<const int> codes, std::size_t q_begin,
                                  std::size_t q_end, std::size_t lo, std::size_t hi,
                                  const AttentionMask& mask, std::size_t mask_offset,
                                  const MelDecoderParams& p) {
  std::vector<CodeFeatures> feats;
  feats.reserve(hi - lo);
  for (std::size_t j = lo; j < hi; ++j) feats.push_back(features(codes[j], p));
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.width));

  std::vector<MelFrame> frames;
  for (std::size_t i = q_begin; i < q_end; ++i) {
    const auto& qi = feats[i - lo];
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> s(hi - lo, 0.0);
    for (std::size_t j = lo; j < hi; ++j) {
      if (!mask.allowed(i - mask_offset, j - mask_offset)) continue;
      s[j - lo] = qi.query.dot(feats[j - lo].key) * scale;
      mx = std::max(mx, s[j - lo]);
    }
    double z = 0.0;
    Eigen::VectorXd ctx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.width));
    for (std::size_t j = lo; j < hi; ++j) {
      if (!mask.allowed(i - mask_offset, j - mask_offset)) continue;
      const double e = std::exp(s[j - lo] - mx);
      z += e;
      ctx += e * feats[j - lo].value;
    }
    const Eigen::VectorXd h = qi.embed + ctx / z;
    Eigen::VectorXd out = p.head_bias;
    out.noalias() += p.head * h;
    for (std::size_t f = 0; f < p.frames_per_code; ++f)
      frames.push_back(out.segment(static_cast<Eigen::Index>(f * kMelChannels), kMelChannels));
  }
  return frames;
}

}  // namespace

MelDecoderParams MelDecoderParams::init(std::size_t speech_vocab, std::uint64_t seed) {
  MelDecoderParams p;
  p.speech_vocab = speech_vocab;
  const auto w = static_cast<Eigen::Index>(p.width);
  std::mt19937_64 rng(seed);
  p.code_embed.resize(static_cast<Eigen::Index>(speech_vocab), w);
  p.wq.resize(w, w);
  p.wk.resize(w, w);
  p.wv.resize(w, w);
  p.head.resize(static_cast<Eigen::Index>(p.frames_per_code * kMelChannels), w);
  p.head_bias.resize(p.head.rows());
  fill_uniform(p.code_embed, rng, 1.0);
  fill_uniform(p.wq, rng, 0.5);
  fill_uniform(p.wk, rng, 0.5);
  fill_uniform(p.wv, rng, 0.5);
  fill_uniform(p.head, rng, 0.2);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (Eigen::Index i = 0; i < p.head_bias.size(); ++i) p.head_bias(i) = dist(rng);
  return p;
}

MelChunk decode_block(const CodeBlockStream& stream, std::size_t k,
                      const MelDecoderParams& params) {
  const BlockLayout layout = stream.layout();
  if (k >= layout.n_blocks()) throw std::out_of_range("block index outside the stream");
  const auto [lo_block, hi_block] =
      dit_visible_blocks(k, layout.n_blocks(), params.lookback, params.lookahead);
  const std::size_t lo = layout.block_begin(lo_block);
  const std::size_t hi = layout.block_end(hi_block);
  const AttentionMask local =
      dit_window_mask(hi - lo, stream.block_size, params.lookback, params.lookahead);
  MelChunk chunk;
  chunk.block = k;
  chunk.frames = decode_rows(stream.codes, layout.block_begin(k), layout.block_end(k), lo, hi,
                             local, lo, params);
  return chunk;
}

std::vector<MelFrame> offline_decode(const CodeBlockStream& stream,
                                     const MelDecoderParams& params) {
  if (stream.codes.empty()) throw std::invalid_argument("empty code stream");
  const std::size_t n = stream.codes.size();
  const AttentionMask mask =
      dit_window_mask(n, stream.block_size, params.lookback, params.lookahead);
  const BlockLayout layout = stream.layout();
  std::vector<MelFrame> frames;
  // Same per-block key range as the mask row, so skipped keys match exactly.
  for (std::size_t b = 0; b < layout.n_blocks(); ++b) {
    auto rows = decode_rows(stream.codes, layout.block_begin(b), layout.block_end(b), 0, n, mask,
                            0, params);
    frames.insert(frames.end(), rows.begin(), rows.end());
  }
  return frames;
}

StreamingMelDecoder::StreamingMelDecoder(const MelDecoderParams& params, std::size_t block_size)
    : params_(&params) {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
  stream_.block_size = block_size;
}

std::vector<EmittedChunk> StreamingMelDecoder::release(std::size_t ready_blocks) {
  std::vector<EmittedChunk> out;
  const std::size_t newest = stream_.n_blocks() - 1;
  for (; emitted_ < ready_blocks; ++emitted_)
    out.push_back({decode_block(stream_, emitted_, *params_), newest});
  return out;
}

std::vector<EmittedChunk> StreamingMelDecoder::push(std::span<const int> codes) {
  if (finished_) throw std::logic_error("push after finish");
  stream_.codes.insert(stream_.codes.end(), codes.begin(), codes.end());
  const std::size_t complete = stream_.codes.size() / stream_.block_size;
  if (complete <= params_->lookahead) return {};
  return release(complete - params_->lookahead);
}

std::vector<EmittedChunk> StreamingMelDecoder::finish() {
  if (finished_) return {};
  finished_ = true;
  if (stream_.codes.empty()) throw std::invalid_argument("empty code stream");
  return release(stream_.n_blocks());
}

std::vector<EmittedChunk> stream_decode(const CodeBlockStream& stream,
                                        const MelDecoderParams& params) {
  if (stream.codes.empty()) throw std::invalid_argument("empty code stream");
  StreamingMelDecoder decoder(params, stream.block_size);
  std::vector<EmittedChunk> out;
  const BlockLayout layout = stream.layout();
  for (std::size_t b = 0; b < layout.n_blocks(); ++b) {
    const std::span<const int> block(stream.codes.data() + layout.block_begin(b),
                                     layout.block_end(b) - layout.block_begin(b));
    for (auto& c : decoder.push(block)) out.push_back(std::move(c));
  }
  for (auto& c : decoder.finish()) out.push_back(std::move(c));
  return out;
}

std::vector<MelFrame> concat_frames(const std::vector<EmittedChunk>& chunks) {
  std::vector<MelFrame> frames;
  for (const auto& c : chunks) frames.insert(frames.end(), c.chunk.frames.begin(), c.chunk.frames.end());
  return frames;
}

VocoderParams VocoderParams::init(std::size_t receptive_field, std::uint64_t seed,
                                  std::size_t samples_per_frame) {
  if (receptive_field < 1) throw std::invalid_argument("receptive field must be >= 1");
  VocoderParams p;
  p.receptive_field = receptive_field;
  p.samples_per_frame = samples_per_frame;
  std::mt19937_64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(receptive_field * kMelChannels));
  for (std::size_t r = 0; r < receptive_field; ++r) {
    Eigen::MatrixXd tap(static_cast<Eigen::Index>(samples_per_frame), kMelChannels);
    fill_uniform(tap, rng, scale);
    p.taps.push_back(std::move(tap));
  }
  p.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(samples_per_frame));
  return p;
}

namespace {

// history[r] is frame f - r, or null before the stream start.
void frame_samples(std::span<const MelFrame* const> history, const VocoderParams& p,
                   std::vector<double>& out) {
  Eigen::VectorXd acc = p.bias;
  for (std::size_t r = 0; r < history.size(); ++r) {
    if (!history[r]) continue;
    if (history[r]->size() != static_cast<Eigen::Index>(kMelChannels))
      throw std::invalid_argument("mel frames must have 128 channels");
    acc.noalias() += p.taps[r] * *history[r];
  }
  for (Eigen::Index i = 0; i < acc.size(); ++i) out.push_back(std::tanh(acc(i)));
}

}  // namespace

std::vector<double> vocode(std::span<const MelFrame> mel, const VocoderParams& params) {
  std::vector<double> out;
  out.reserve(mel.size() * params.samples_per_frame);
  std::vector<const MelFrame*> history(params.receptive_field);
  for (std::size_t f = 0; f < mel.size(); ++f) {
    for (std::size_t r = 0; r < params.receptive_field; ++r)
      history[r] = r <= f ? &mel[f - r] : nullptr;
    frame_samples(history, params, out);
  }
  return out;
}

StreamingVocoder::StreamingVocoder(const VocoderParams& params) : params_(&params) {}

std::vector<double> StreamingVocoder::push(std::span<const MelFrame> frames) {
  std::vector<double> out;
  out.reserve(frames.size() * params_->samples_per_frame);
  const std::size_t R = params_->receptive_field;
  std::vector<const MelFrame*> history(R);
  for (const auto& frame : frames) {
    context_.push_back(frame);
    const std::size_t have = context_.size();
    for (std::size_t r = 0; r < R; ++r) history[r] = r < have ? &context_[have - 1 - r] : nullptr;
    frame_samples(history, *params_, out);
    if (context_.size() > R - 1) context_.pop_front();
  }
  return out;
}

void write_mel_csv(std::ostream& os, std::span<const MelFrame> frames) {
  os << "frame";
  for (std::size_t c = 0; c < kMelChannels; ++c) os << ",c" << c;
  os << '\n';
  const auto old = os.precision(17);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    os << f;
    for (Eigen::Index c = 0; c < frames[f].size(); ++c) os << ',' << frames[f](c);
    os << '\n';
  }
  os.precision(old);
}

void write_waveform_csv(std::ostream& os, std::span<const double> samples) {
  os << "sample,value\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) os << i << ',' << samples[i] << '\n';
  os.precision(old);
}

}  // namespace omni
