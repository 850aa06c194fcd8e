#include "omni/latency.hpp"

#include <algorithm>
#include <stdexcept>

namespace omni {

std::vector<TraceEvent> build_pipeline_trace(const GenerationResult& result,
                                             const ModelDims& dims, std::size_t block_size) {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
  std::vector<TraceEvent> trace;
  for (std::size_t i = 0; i < result.prefill_chunks; ++i)
    trace.push_back({Stage::Prefill, dims.n_layers_thinker});

  std::size_t codes = 0;
  std::size_t decoded = 0;
  auto flush = [&](std::size_t ready_blocks) {
    for (; decoded < ready_blocks; ++decoded) {
      trace.push_back({Stage::MelDecode, 1});
      trace.push_back({Stage::Vocode, 1});
    }
  };
  for (const auto& e : result.events) {
    switch (e.kind) {
      case StreamEventKind::TextToken:
        trace.push_back({Stage::ThinkerStep, dims.n_layers_thinker});
        break;
      case StreamEventKind::SpeechCode:
        trace.push_back({Stage::TalkerStep, dims.n_layers_talker});
        ++codes;
        // Block k decodes once block k+1 is complete.
        if (codes / block_size >= 2) flush(codes / block_size - 1);
        break;
      case StreamEventKind::TextEnd:
      case StreamEventKind::SpeechEnd:
        break;
    }
  }
  flush((codes + block_size - 1) / block_size);
  return trace;
}

namespace {

Micros stage_cost(Stage s, const StageCosts& c) {
  switch (s) {
    case Stage::Prefill: return c.prefill_chunk;
    case Stage::ThinkerStep: return c.thinker_step;
    case Stage::TalkerStep: return c.talker_step;
    case Stage::MelDecode: return c.mel_block;
    case Stage::Vocode: return c.vocoder_chunk;
  }
  return Micros{0};
}

Micros overhead(const TraceEvent& e, const StageCosts& c) {
  return c.per_layer * static_cast<Micros::rep>(e.layers);
}

void check_costs(const StageCosts& c) {
  for (Micros m : {c.prefill_chunk, c.thinker_step, c.talker_step, c.mel_block, c.vocoder_chunk,
                   c.per_layer})
    if (m.count() < 0) throw std::invalid_argument("stage costs must be non-negative");
}

}  // namespace

std::vector<TimedEvent> simulate(const std::vector<TraceEvent>& trace, const StageCosts& costs) {
  check_costs(costs);
  std::vector<TimedEvent> timed;
  timed.reserve(trace.size());
  Micros clock{0};
  for (const auto& e : trace) {
    clock += stage_cost(e.stage, costs) + overhead(e, costs);
    timed.push_back({e, clock});
  }
  return timed;
}

LatencyBreakdown first_packet_latency(const std::vector<TraceEvent>& trace,
                                      const StageCosts& costs) {
  const auto first = [&](Stage s) {
    return std::find_if(trace.begin(), trace.end(), [s](const auto& e) { return e.stage == s; });
  };
  const auto first_code = first(Stage::TalkerStep);
  const auto first_audio = first(Stage::Vocode);
  if (first_code == trace.end()) throw std::invalid_argument("trace has no speech code");
  if (first_audio == trace.end()) throw std::invalid_argument("trace has no decoded chunk");
  if (first_audio < first_code) throw std::invalid_argument("audio precedes its speech code");

  const auto timed = simulate(trace, costs);
  LatencyBreakdown b;
  const auto code_at = static_cast<std::size_t>(first_code - trace.begin());
  const auto audio_at = static_cast<std::size_t>(first_audio - trace.begin());
  for (std::size_t i = 0; i <= audio_at; ++i) {
    const auto& e = trace[i];
    const Micros cost = stage_cost(e.stage, costs);
    if (e.stage == Stage::Prefill && i < code_at)
      b.input_processing += cost;
    else if (i <= code_at)
      b.text_to_voice += cost;
    else
      b.voice_to_audio += cost;
    b.architecture += overhead(e, costs);
  }
  b.total = timed[audio_at].finish;
  return b;
}

}  // namespace omni
