#include "omni/masks.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace omni {

AttentionMask::AttentionMask(std::size_t n, bool fill)
    : n_(n), allow_(n * n, fill ? 1 : 0) {}

std::size_t AttentionMask::row_count(std::size_t i) const {
  return static_cast<std::size_t>(
      std::count(allow_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                 allow_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_), 1));
}

BlockLayout::BlockLayout(std::size_t block_size_, std::size_t length_)
    : block_size(block_size_), length(length_) {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
}

std::size_t BlockLayout::block_end(std::size_t b) const {
  return std::min(length, (b + 1) * block_size);
}

AttentionMask audio_block_mask(std::size_t n_frames, std::size_t frames_per_block) {
  if (n_frames < 1) throw std::invalid_argument("audio mask needs at least one frame");
  const BlockLayout layout(frames_per_block, n_frames);
  AttentionMask mask(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const std::size_t b = layout.block_of(i);
    for (std::size_t j = layout.block_begin(b); j < layout.block_end(b); ++j) mask.set(i, j, true);
  }
  return mask;
}

AttentionMask causal_mask(std::size_t n) {
  AttentionMask mask(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, true);
  return mask;
}

std::pair<std::size_t, std::size_t> dit_visible_blocks(std::size_t block, std::size_t n_blocks,
                                                       std::size_t lookback,
                                                       std::size_t lookahead) {
  const std::size_t lo = block >= lookback ? block - lookback : 0;
  const std::size_t hi = std::min(block + lookahead, n_blocks - 1);
  return {lo, hi};
}

AttentionMask dit_window_mask(std::size_t n_codes, std::size_t block_size,
                              std::size_t lookback, std::size_t lookahead) {
  if (n_codes < 1) throw std::invalid_argument("dit mask needs at least one code");
  const BlockLayout layout(block_size, n_codes);
  AttentionMask mask(n_codes);
  for (std::size_t i = 0; i < n_codes; ++i) {
    const auto [lo, hi] =
        dit_visible_blocks(layout.block_of(i), layout.n_blocks(), lookback, lookahead);
    for (std::size_t j = layout.block_begin(lo); j < layout.block_end(hi); ++j)
      mask.set(i, j, true);
  }
  return mask;
}

std::vector<std::pair<std::size_t, std::size_t>> prefill_plan(std::size_t total_len,
                                                              std::size_t chunk_len) {
  if (chunk_len < 1) throw std::invalid_argument("chunk_len must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t s = 0; s < total_len; s += chunk_len)
    spans.emplace_back(s, std::min(total_len, s + chunk_len));
  return spans;
}

std::vector<std::size_t> mask_receptive_field(const AttentionMask& mask, std::size_t i) {
  if (i >= mask.size()) throw std::out_of_range("query index outside mask");
  std::vector<std::size_t> keys;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask.allowed(i, j)) keys.push_back(j);
  return keys;
}

void write_mask_csv(std::ostream& os, const AttentionMask& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t j = 0; j < mask.size(); ++j) os << (j ? "," : "") << (mask.allowed(i, j) ? 1 : 0);
    os << '\n';
  }
}

void write_mask_pgm(std::ostream& os, const AttentionMask& mask) {
  os << "P2\n" << mask.size() << ' ' << mask.size() << "\n255\n";
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t j = 0; j < mask.size(); ++j)
      os << (j ? " " : "") << (mask.allowed(i, j) ? 255 : 0);
    os << '\n';
  }
}

}  // namespace omni
