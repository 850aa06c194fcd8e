#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace omni {

/// Dense boolean allow-matrix: allowed(i, j) means query i may attend key j.
///
/// Masks are small at this scale, so they are stored densely. A production
/// layout would keep one [lo, hi) key interval per query block instead.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t n, bool fill = false);

  std::size_t size() const { return n_; }
  bool allowed(std::size_t i, std::size_t j) const { return allow_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { allow_[i * n_ + j] = v ? 1 : 0; }
  std::size_t row_count(std::size_t i) const;

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> allow_;
};

struct BlockLayout {
  std::size_t block_size = 1;
  std::size_t length = 0;

  BlockLayout(std::size_t block_size, std::size_t length);
  std::size_t n_blocks() const { return (length + block_size - 1) / block_size; }
  std::size_t block_of(std::size_t i) const { return i / block_size; }
  std::size_t block_begin(std::size_t b) const { return b * block_size; }
  std::size_t block_end(std::size_t b) const;
};

/// 50 frames of 40 ms make the 2 s attention block of the audio encoder.
inline constexpr std::size_t kAudioFramesPerBlock = 50;

AttentionMask audio_block_mask(std::size_t n_frames,
                               std::size_t frames_per_block = kAudioFramesPerBlock);
AttentionMask causal_mask(std::size_t n);

/// Code-to-mel decoder mask: block b sees blocks [b - lookback, b + lookahead].
AttentionMask dit_window_mask(std::size_t n_codes, std::size_t block_size,
                              std::size_t lookback = 2, std::size_t lookahead = 1);

/// Inclusive range of blocks visible from `block` under the sliding window.
std::pair<std::size_t, std::size_t> dit_visible_blocks(std::size_t block, std::size_t n_blocks,
                                                       std::size_t lookback = 2,
                                                       std::size_t lookahead = 1);

/// Consecutive half-open spans covering [0, total_len).
std::vector<std::pair<std::size_t, std::size_t>> prefill_plan(std::size_t total_len,
                                                              std::size_t chunk_len);

std::vector<std::size_t> mask_receptive_field(const AttentionMask& mask, std::size_t i);

void write_mask_csv(std::ostream& os, const AttentionMask& mask);
/// Plain-text PGM (P2), allowed = 255.
void write_mask_pgm(std::ostream& os, const AttentionMask& mask);

}  // namespace omni
