#include "omni/generate.hpp"

#include "json.hpp"

#include <limits>
#include <ostream>
#include <stdexcept>

namespace omni {

std::string_view to_string(StreamEventKind kind) {
  switch (kind) {
    case StreamEventKind::TextToken: return "text_token";
    case StreamEventKind::SpeechCode: return "speech_code";
    case StreamEventKind::TextEnd: return "text_end";
    case StreamEventKind::SpeechEnd: return "speech_end";
  }
  return "unknown";
}

std::vector<int> GenerationResult::text_tokens() const {
  std::vector<int> out;
  for (const auto& e : events)
    if (e.kind == StreamEventKind::TextToken) out.push_back(e.id);
  return out;
}

std::vector<int> GenerationResult::speech_codes() const {
  std::vector<int> out;
  for (const auto& e : events)
    if (e.kind == StreamEventKind::SpeechCode) out.push_back(e.id);
  return out;
}

namespace {

std::vector<double> to_std(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

GenerationResult generate_stream(const PackedSequence& prompt, const Matrix& prompt_embeddings,
                                 const ModelParams& params, const SamplerConfig& sampler,
                                 const GenerateOptions& options) {
  if (prompt.size() == 0) throw std::invalid_argument("generation needs a prompt");
  if (options.max_text_steps == 0) throw std::invalid_argument("max_text_steps must be >= 1");
  const auto& d = params.dims;
  const int text_end = d.text_end_id();
  const int speech_end = d.speech_end_id();

  GenerationResult result;
  TokenSampler text_sampler(sampler, 0);
  TokenSampler speech_sampler(sampler, 1);
  std::vector<int> text_history;
  std::vector<int> speech_history;

  ThinkerSession thinker(params);
  const auto triples = prompt.triples();
  result.prefill_chunks = prefill_plan(triples.size(), options.prefill_chunk).size();
  ThinkerOutput out = thinker.prefill(triples, prompt_embeddings, options.prefill_chunk);
  Vector hidden = out.hidden.bottomRows(1).transpose();
  std::vector<double> text_logits = to_std(out.logits.bottomRows(1).row(0));
  std::int64_t next_pos = prompt.max_position + 1;

  TalkerState talker(params);
  std::size_t step = 0;
  int last_token = text_end;

  auto speak = [&](const Vector& h, int token, bool allow_end) {
    Vector logits = talker_step(talker, {h, text_embedding(params, token)}, params);
    if (!allow_end) logits(speech_end) = logits.minCoeff() - 1e9;
    const std::vector<double> z(logits.data(), logits.data() + logits.size());
    const int code = speech_sampler.sample(z, speech_history);
    return code;
  };

  // Text phase: one text token and one speech code per step.
  for (;; ++step) {
    if (step == options.max_text_steps) {
      result.text_truncated = true;
      result.events.push_back({StreamEventKind::TextEnd, text_end, step});
      break;
    }
    const int token = text_sampler.sample(text_logits, text_history);
    text_history.push_back(token);
    last_token = token;
    if (token == text_end) {
      result.events.push_back({StreamEventKind::TextEnd, token, step});
      break;
    }
    result.events.push_back({StreamEventKind::TextToken, token, step});
    const int code = speak(hidden, token, false);
    speech_history.push_back(code);
    result.events.push_back({StreamEventKind::SpeechCode, code, step});

    const PositionTriple pos{next_pos, next_pos, next_pos};
    ++next_pos;
    const Matrix emb = text_embedding(params, token).transpose();
    out = thinker.extend(std::span(&pos, 1), emb);
    hidden = out.hidden.row(0).transpose();
    text_logits = to_std(out.logits.row(0));
  }

  // Tail: the Talker finishes speaking from the final hidden state.
  for (std::size_t tail = 0;; ++tail) {
    if (tail == options.max_speech_tail) {
      result.speech_truncated = true;
      result.events.push_back({StreamEventKind::SpeechEnd, speech_end, step});
      break;
    }
    const int code = speak(hidden, last_token, true);
    if (code == speech_end) {
      result.events.push_back({StreamEventKind::SpeechEnd, code, step});
      break;
    }
    speech_history.push_back(code);
    result.events.push_back({StreamEventKind::SpeechCode, code, step});
    ++step;
  }
  return result;
}

void write_events_jsonl(std::ostream& os, const std::vector<StreamEvent>& events) {
  for (const auto& e : events) {
    nlohmann::ordered_json j{{"kind", to_string(e.kind)}, {"id", e.id}, {"step", e.step}};
    os << j.dump() << '\n';
  }
}

}  // namespace omni
