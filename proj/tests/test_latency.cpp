#include <gtest/gtest.h>

#include "omni/latency.hpp"

namespace omni {
namespace {

using std::chrono::microseconds;

// Two prefill chunks, then `steps` text tokens each paired with a speech code.
GenerationResult lockstep_result(std::size_t steps, std::size_t tail = 0) {
  GenerationResult r;
  r.prefill_chunks = 2;
  std::size_t step = 0;
  for (; step < steps; ++step) {
    r.events.push_back({StreamEventKind::TextToken, 1, step});
    r.events.push_back({StreamEventKind::SpeechCode, 2, step});
  }
  r.events.push_back({StreamEventKind::TextEnd, 0, step});
  for (std::size_t i = 0; i < tail; ++i) r.events.push_back({StreamEventKind::SpeechCode, 3, ++step});
  r.events.push_back({StreamEventKind::SpeechEnd, 0, step});
  return r;
}

StageCosts sample_costs() {
  return {microseconds{20}, microseconds{15}, microseconds{10}, microseconds{25}, microseconds{5},
          microseconds{1}};
}

std::vector<Stage> stages(const std::vector<TraceEvent>& t) {
  std::vector<Stage> s;
  for (const auto& e : t) s.push_back(e.stage);
  return s;
}

TEST(PipelineTrace, DecodesBlockKOnceBlockKPlusOneExists) {
  ModelDims dims;
  const auto trace = build_pipeline_trace(lockstep_result(5), dims, 2);
  using S = Stage;
  const std::vector<Stage> want{S::Prefill,     S::Prefill,    S::ThinkerStep, S::TalkerStep,
                                S::ThinkerStep, S::TalkerStep, S::ThinkerStep, S::TalkerStep,
                                S::ThinkerStep, S::TalkerStep, S::MelDecode,   S::Vocode,
                                S::ThinkerStep, S::TalkerStep, S::MelDecode,   S::Vocode,
                                S::MelDecode,   S::Vocode};
  EXPECT_EQ(stages(trace), want);
  EXPECT_EQ(trace[0].layers, dims.n_layers_thinker);
  EXPECT_EQ(trace[3].layers, dims.n_layers_talker);
  EXPECT_THROW(build_pipeline_trace(lockstep_result(1), dims, 0), std::invalid_argument);
}

TEST(FirstPacket, HandComputedBreakdown) {
  ModelDims dims;
  const auto trace = build_pipeline_trace(lockstep_result(4), dims, 2);
  const auto b = first_packet_latency(trace, sample_costs());
  EXPECT_EQ(b.input_processing, microseconds{40});
  EXPECT_EQ(b.text_to_voice, microseconds{15 + 10});
  EXPECT_EQ(b.voice_to_audio, microseconds{3 * (15 + 10) + 25 + 5});
  // Layers on the path: 2 x 2 prefill, 4 x 2 thinker, 4 x 2 talker, 1 mel, 1 vocoder.
  EXPECT_EQ(b.architecture, microseconds{22});
  EXPECT_EQ(b.total, b.sum());
}

TEST(FirstPacket, ZeroCostsGiveZeros) {
  const auto trace = build_pipeline_trace(lockstep_result(6, 3), ModelDims{}, 4);
  const auto b = first_packet_latency(trace, StageCosts{});
  EXPECT_EQ(b.input_processing.count(), 0);
  EXPECT_EQ(b.text_to_voice.count(), 0);
  EXPECT_EQ(b.voice_to_audio.count(), 0);
  EXPECT_EQ(b.architecture.count(), 0);
  EXPECT_EQ(b.total.count(), 0);
}

TEST(FirstPacket, DoublingPrefillCostOnlyMovesInputProcessing) {
  const auto trace = build_pipeline_trace(lockstep_result(9, 2), ModelDims{}, 4);
  auto costs = sample_costs();
  const auto a = first_packet_latency(trace, costs);
  costs.prefill_chunk *= 2;
  const auto b = first_packet_latency(trace, costs);
  EXPECT_GT(b.input_processing, a.input_processing);
  EXPECT_EQ(b.text_to_voice, a.text_to_voice);
  EXPECT_EQ(b.voice_to_audio, a.voice_to_audio);
  EXPECT_EQ(b.architecture, a.architecture);
}

TEST(FirstPacket, SumEqualsTotalAcrossShapes) {
  auto costs = sample_costs();
  for (std::size_t steps = 1; steps < 12; ++steps)
    for (std::size_t block = 1; block < 5; ++block) {
      costs.per_layer = microseconds{static_cast<long>(steps)};
      const auto trace = build_pipeline_trace(lockstep_result(steps, steps % 3), ModelDims{}, block);
      const auto b = first_packet_latency(trace, costs);
      EXPECT_EQ(b.sum(), b.total);
      EXPECT_EQ(simulate(trace, costs).back().finish >= b.total, true);
    }
}

TEST(FirstPacket, RejectsTracesWithoutAudio) {
  const std::vector<TraceEvent> no_audio{{Stage::Prefill, 1}, {Stage::TalkerStep, 1}};
  EXPECT_THROW(first_packet_latency(no_audio, sample_costs()), std::invalid_argument);
  const std::vector<TraceEvent> no_code{{Stage::Prefill, 1}, {Stage::Vocode, 1}};
  EXPECT_THROW(first_packet_latency(no_code, sample_costs()), std::invalid_argument);
  auto negative = sample_costs();
  negative.talker_step = microseconds{-1};
  EXPECT_THROW(simulate(no_audio, negative), std::invalid_argument);
}

TEST(Simulate, SerialFinishTimes) {
  const std::vector<TraceEvent> t{{Stage::Prefill, 2}, {Stage::ThinkerStep, 2}, {Stage::Vocode, 1}};
  const auto timed = simulate(t, sample_costs());
  ASSERT_EQ(timed.size(), 3u);
  EXPECT_EQ(timed[0].finish, microseconds{22});
  EXPECT_EQ(timed[1].finish, microseconds{22 + 17});
  EXPECT_EQ(timed[2].finish, microseconds{22 + 17 + 6});
}

}  // namespace
}  // namespace omni
