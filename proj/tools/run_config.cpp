#include "run_config.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace omni::cli {

namespace {

using nlohmann::json;

template <class T>
void read(const json& obj, const char* key, T& into) {
  if (auto it = obj.find(key); it != obj.end()) into = it->template get<T>();
}

void read_micros(const json& obj, const char* key, Micros& into) {
  if (auto it = obj.find(key); it != obj.end()) into = Micros{it->get<std::int64_t>()};
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw std::invalid_argument("unknown config key '" + where + it.key() + "'");
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  const json root = json::parse(json_text);
  if (!root.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown(root, {"seed", "model", "rope", "sampler", "generate", "codec", "costs_us"}, "");

  RunConfig cfg;
  read(root, "seed", cfg.seed);
  if (auto m = root.find("model"); m != root.end()) {
    reject_unknown(*m,
                   {"d_model", "n_heads", "head_dim", "ffn_hidden", "n_layers_thinker",
                    "n_layers_talker", "text_vocab", "speech_vocab"},
                   "model.");
    read(*m, "d_model", cfg.dims.d_model);
    read(*m, "n_heads", cfg.dims.n_heads);
    read(*m, "head_dim", cfg.dims.head_dim);
    read(*m, "ffn_hidden", cfg.dims.ffn_hidden);
    read(*m, "n_layers_thinker", cfg.dims.n_layers_thinker);
    read(*m, "n_layers_talker", cfg.dims.n_layers_talker);
    read(*m, "text_vocab", cfg.dims.text_vocab);
    read(*m, "speech_vocab", cfg.dims.speech_vocab);
  }
  cfg.dims.validate();
  cfg.rope = RopeConfig::with_default_split(cfg.dims.head_dim);
  if (auto r = root.find("rope"); r != root.end()) {
    reject_unknown(*r, {"split", "theta_base"}, "rope.");
    read(*r, "split", cfg.rope.split);
    read(*r, "theta_base", cfg.rope.theta_base);
  }
  cfg.rope.validate();
  if (auto s = root.find("sampler"); s != root.end()) {
    reject_unknown(*s, {"top_p", "repetition_penalty", "temperature"}, "sampler.");
    read(*s, "top_p", cfg.sampler.top_p);
    read(*s, "repetition_penalty", cfg.sampler.repetition_penalty);
    read(*s, "temperature", cfg.sampler.temperature);
  }
  cfg.sampler.seed = cfg.seed;
  cfg.sampler.validate();
  if (auto g = root.find("generate"); g != root.end()) {
    reject_unknown(*g, {"prefill_chunk", "max_text_steps", "max_speech_tail"}, "generate.");
    read(*g, "prefill_chunk", cfg.generate.prefill_chunk);
    read(*g, "max_text_steps", cfg.generate.max_text_steps);
    read(*g, "max_speech_tail", cfg.generate.max_speech_tail);
  }
  if (auto c = root.find("codec"); c != root.end()) {
    reject_unknown(*c, {"block_size", "receptive_field", "vocoder_chunk_frames"}, "codec.");
    read(*c, "block_size", cfg.codec.block_size);
    read(*c, "receptive_field", cfg.codec.receptive_field);
    read(*c, "vocoder_chunk_frames", cfg.codec.vocoder_chunk_frames);
  }
  if (cfg.codec.block_size < 1 || cfg.codec.receptive_field < 1 ||
      cfg.codec.vocoder_chunk_frames < 1)
    throw std::invalid_argument("codec sizes must be >= 1");
  if (auto c = root.find("costs_us"); c != root.end()) {
    reject_unknown(*c,
                   {"prefill_chunk", "thinker_step", "talker_step", "mel_block",
                    "vocoder_chunk", "per_layer"},
                   "costs_us.");
    read_micros(*c, "prefill_chunk", cfg.costs.prefill_chunk);
    read_micros(*c, "thinker_step", cfg.costs.thinker_step);
    read_micros(*c, "talker_step", cfg.costs.talker_step);
    read_micros(*c, "mel_block", cfg.costs.mel_block);
    read_micros(*c, "vocoder_chunk", cfg.costs.vocoder_chunk);
    read_micros(*c, "per_layer", cfg.costs.per_layer);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace omni::cli
