#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <vector>

#include "omni/masks.hpp"

namespace omni {

/// Mel geometry of the audio front end: 128 channels, 25 ms window, 10 ms hop.
inline constexpr std::size_t kMelChannels = 128;
inline constexpr double kMelWindowMs = 25.0;
inline constexpr double kMelHopMs = 10.0;
inline constexpr std::size_t kSampleRate = 16000;
/// Waveform samples produced per mel frame (one hop at 16 kHz).
inline constexpr std::size_t kSamplesPerFrame = 160;

using MelFrame = Eigen::VectorXd;

/// Speech codes grouped into fixed-size blocks; the last block may be partial.
struct CodeBlockStream {
  std::vector<int> codes;
  std::size_t block_size = 4;

  BlockLayout layout() const { return BlockLayout(block_size, codes.size()); }
  std::size_t n_blocks() const { return layout().n_blocks(); }
};

struct MelChunk {
  std::size_t block = 0;
  std::vector<MelFrame> frames;

  friend bool operator==(const MelChunk&, const MelChunk&) = default;
};

/// Toy code-to-mel decoder: code embeddings, one attention layer under the
/// sliding block window, and a linear head producing `frames_per_code` mel
/// frames per code.
struct MelDecoderParams {
  std::size_t speech_vocab = 128;
  std::size_t width = 32;
  std::size_t frames_per_code = 2;
  std::size_t lookback = 2;
  std::size_t lookahead = 1;
  Eigen::MatrixXd code_embed;  // speech_vocab x width
  Eigen::MatrixXd wq, wk, wv;  // width x width
  Eigen::MatrixXd head;        // (frames_per_code * 128) x width
  Eigen::VectorXd head_bias;

  static MelDecoderParams init(std::size_t speech_vocab, std::uint64_t seed);
};

/// Decodes block k from blocks k-lookback .. k+lookahead only.
MelChunk decode_block(const CodeBlockStream& stream, std::size_t k,
                      const MelDecoderParams& params);

/// Full-sequence masked decode; the reference the streaming path must match.
std::vector<MelFrame> offline_decode(const CodeBlockStream& stream,
                                     const MelDecoderParams& params);

struct EmittedChunk {
  MelChunk chunk;
  /// Index of the newest block ingested when the chunk was released.
  std::size_t newest_block = 0;
};

/// Incremental decoder. Chunk k is released as soon as block k + lookahead is
/// complete; finish() flushes the rest. Single owner: push() and finish() must
/// not race.
class StreamingMelDecoder {
 public:
  StreamingMelDecoder(const MelDecoderParams& params, std::size_t block_size);

  std::vector<EmittedChunk> push(std::span<const int> codes);
  std::vector<EmittedChunk> finish();
  bool finished() const { return finished_; }

 private:
  std::vector<EmittedChunk> release(std::size_t ready_blocks);

  const MelDecoderParams* params_;
  CodeBlockStream stream_;
  std::size_t emitted_ = 0;
  bool finished_ = false;
};

/// Streams the whole input block by block and returns every emitted chunk.
std::vector<EmittedChunk> stream_decode(const CodeBlockStream& stream,
                                        const MelDecoderParams& params);

std::vector<MelFrame> concat_frames(const std::vector<EmittedChunk>& chunks);

/// Toy causal vocoder with a receptive field of `receptive_field` frames:
/// samples of frame f = tanh(sum_r W_r mel[f - r] + b), zero frames before
/// the stream start.
struct VocoderParams {
  std::size_t receptive_field = 8;
  std::size_t samples_per_frame = kSamplesPerFrame;
  std::vector<Eigen::MatrixXd> taps;  // receptive_field x (samples x 128)
  Eigen::VectorXd bias;

  static VocoderParams init(std::size_t receptive_field, std::uint64_t seed,
                            std::size_t samples_per_frame = kSamplesPerFrame);
};

std::vector<double> vocode(std::span<const MelFrame> mel, const VocoderParams& params);

/// Chunk-by-chunk vocoder retaining receptive_field - 1 frames of context.
class StreamingVocoder {
 public:
  explicit StreamingVocoder(const VocoderParams& params);
  std::vector<double> push(std::span<const MelFrame> frames);

 private:
  const VocoderParams* params_;
  std::deque<MelFrame> context_;
};

void write_mel_csv(std::ostream& os, std::span<const MelFrame> frames);
void write_waveform_csv(std::ostream& os, std::span<const double> samples);

}  // namespace omni
