#pragma once

#include <chrono>
#include <cstddef>
#include <vector>

#include "omni/generate.hpp"

namespace omni {

using Micros = std::chrono::microseconds;

enum class Stage {
  Prefill,      // one prompt chunk through the Thinker
  ThinkerStep,  // one text token
  TalkerStep,   // one speech code
  MelDecode,    // one code block to mel frames
  Vocode,       // one mel chunk to waveform
};

struct TraceEvent {
  Stage stage = Stage::Prefill;
  /// Transformer layers the stage runs; drives the architecture overhead.
  std::size_t layers = 0;
};

/// Synthetic per-stage costs. Integer microseconds keep the accounting exact.
struct StageCosts {
  Micros prefill_chunk{0};
  Micros thinker_step{0};
  Micros talker_step{0};
  Micros mel_block{0};
  Micros vocoder_chunk{0};
  /// Fixed cost of every layer invocation, whatever the stage.
  Micros per_layer{0};
};

struct TimedEvent {
  TraceEvent event;
  Micros finish{0};
};

/// The four sources of first-packet delay.
struct LatencyBreakdown {
  Micros input_processing{0};   // prompt prefill
  Micros text_to_voice{0};      // first text token until first speech code
  Micros voice_to_audio{0};     // first speech code until first audio chunk
  Micros architecture{0};       // per-layer overhead along that path
  Micros total{0};              // finish time of the first audio chunk

  Micros sum() const { return input_processing + text_to_voice + voice_to_audio + architecture; }
};

/// Pipeline order of a generated stream: prefill chunks, then per step a
/// Thinker step and a Talker step, with a mel decode and vocoder chunk for
/// block k once block k+1 of speech codes exists (the rest at the end).
std::vector<TraceEvent> build_pipeline_trace(const GenerationResult& result,
                                             const ModelDims& dims, std::size_t block_size);

/// Serial execution: each event finishes after its own cost plus layer overhead.
std::vector<TimedEvent> simulate(const std::vector<TraceEvent>& trace, const StageCosts& costs);

/// Throws std::invalid_argument when the trace has no speech code or no audio chunk.
LatencyBreakdown first_packet_latency(const std::vector<TraceEvent>& trace,
                                      const StageCosts& costs);

}  // namespace omni
