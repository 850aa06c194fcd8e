#pragma once

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "omni/model.hpp"
#include "omni/sampler.hpp"

namespace omni {

enum class StreamEventKind { TextToken, SpeechCode, TextEnd, SpeechEnd };

std::string_view to_string(StreamEventKind kind);

struct StreamEvent {
  StreamEventKind kind = StreamEventKind::TextToken;
  int id = 0;
  std::size_t step = 0;

  friend bool operator==(const StreamEvent&, const StreamEvent&) = default;
};

struct GenerateOptions {
  std::size_t prefill_chunk = 16;
  std::size_t max_text_steps = 32;
  /// Talker steps allowed after the text track has ended.
  std::size_t max_speech_tail = 32;
};

struct GenerationResult {
  std::vector<StreamEvent> events;
  /// The text track hit max_text_steps; its TextEnd was forced.
  bool text_truncated = false;
  /// The speech tail hit max_speech_tail; its SpeechEnd was forced.
  bool speech_truncated = false;
  std::size_t prefill_chunks = 0;

  std::vector<int> text_tokens() const;
  std::vector<int> speech_codes() const;
};

/// Runs Thinker and Talker in lock-step.
///
/// Each step the Thinker samples one text token; the Talker immediately
/// consumes (hidden state, token embedding) and emits one speech code, with
/// end-of-speech suppressed while text is still flowing. After TextEnd the
/// Talker keeps consuming the final hidden state until it samples
/// end-of-speech or runs out of tail steps. The stream always closes with
/// TextEnd followed by SpeechEnd.
GenerationResult generate_stream(const PackedSequence& prompt, const Matrix& prompt_embeddings,
                                 const ModelParams& params, const SamplerConfig& sampler,
                                 const GenerateOptions& options = {});

/// One JSON object per line: {"kind":..,"id":..,"step":..}.
void write_events_jsonl(std::ostream& os, const std::vector<StreamEvent>& events);

}  // namespace omni
