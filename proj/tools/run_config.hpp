#pragma once

#include <cstdint>
#include <string>

#include "omni/generate.hpp"
#include "omni/latency.hpp"
#include "omni/model.hpp"
#include "omni/sampler.hpp"

namespace omni::cli {

struct CodecConfig {
  std::size_t block_size = 4;
  std::size_t receptive_field = 8;
  /// Mel frames handed to the streaming vocoder per call.
  std::size_t vocoder_chunk_frames = 5;
};

/// Everything a CLI run depends on. All randomness derives from `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelDims dims;
  RopeConfig rope = RopeConfig::with_default_split(16);
  SamplerConfig sampler;
  GenerateOptions generate;
  CodecConfig codec;
  StageCosts costs{Micros{20000}, Micros{15000}, Micros{10000}, Micros{25000}, Micros{5000},
                   Micros{500}};

  std::uint64_t model_seed() const { return seed; }
  std::uint64_t embedding_seed() const { return seed + 1; }
  std::uint64_t decoder_seed() const { return seed + 2; }
  std::uint64_t vocoder_seed() const { return seed + 3; }
};

/// Reads a JSON config; absent keys keep their defaults.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

}  // namespace omni::cli
