#include "cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "omni/codec.hpp"
#include "omni/generate.hpp"
#include "omni/latency.hpp"
#include "omni/manifest.hpp"
#include "omni/masks.hpp"
#include "omni/model.hpp"
#include "omni/preference.hpp"
#include "omni/sequencer.hpp"
#include "run_config.hpp"

namespace omni::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  RunConfig config() const {
    RunConfig cfg = config_path.empty() ? parse_config("{}") : load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.sampler.seed = *seed;
    }
    return cfg;
  }
};

/// Writes to `<out_dir>/<name>` when an output directory is set, else to `fallback`.
class Sink {
 public:
  Sink(const Globals& g, const std::string& name, std::ostream& fallback) {
    if (g.out_dir.empty()) {
      os_ = &fallback;
    } else {
      fs::create_directories(g.out_dir);
      file_.open(fs::path(g.out_dir) / name, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot write '" + name + "' in " + g.out_dir);
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_ = nullptr;
};

PackedSequence pack_manifest(const std::string& path) {
  const auto segments = parse_manifest(read_file(path));
  if (segments.empty()) throw std::invalid_argument("manifest '" + path + "' has no segments");
  return pack_sequence(segments);
}

struct Generated {
  ModelParams params;
  GenerationResult result;
};

Generated run_generation(const RunConfig& cfg, const std::string& manifest) {
  const PackedSequence packed = pack_manifest(manifest);
  Generated g{ModelParams::init(cfg.dims, cfg.rope, cfg.model_seed()), {}};
  const Matrix emb = toy_embeddings(packed, g.params, cfg.embedding_seed());
  g.result = generate_stream(packed, emb, g.params, cfg.sampler, cfg.generate);
  return g;
}

std::vector<int> read_codes(const std::string& path) {
  std::vector<int> codes;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.is_number_integer()) {
        codes.push_back(j.get<int>());
      } else if (j.contains("kind")) {
        if (j.at("kind") == "speech_code") codes.push_back(j.at("id").get<int>());
      } else {
        codes.push_back(j.at("code").get<int>());
      }
    } catch (const json::exception& e) {
      throw std::invalid_argument("codes line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return codes;
}

double max_abs_diff(const std::vector<MelFrame>& a, const std::vector<MelFrame>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return d;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::vector<double> stream_vocode(const std::vector<MelFrame>& mel, const VocoderParams& vp,
                                  std::size_t chunk) {
  StreamingVocoder voc(vp);
  std::vector<double> wave;
  for (std::size_t b = 0; b < mel.size(); b += chunk) {
    const std::size_t n = std::min(chunk, mel.size() - b);
    auto part = voc.push(std::span(mel).subspan(b, n));
    wave.insert(wave.end(), part.begin(), part.end());
  }
  return wave;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

json latency_json(const LatencyBreakdown& b) {
  return {{"input_processing_us", b.input_processing.count()},
          {"text_to_voice_us", b.text_to_voice.count()},
          {"voice_to_audio_us", b.voice_to_audio.count()},
          {"architecture_us", b.architecture.count()},
          {"total_us", b.total.count()}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming multimodal sequence toolkit", "omni"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out_dir, "Directory for output files");

  std::string manifest;
  auto* pack = app.add_subcommand("pack", "Pack a manifest and print position triples as CSV");
  pack->fallthrough();
  pack->add_option("manifest", manifest)->required();

  std::string mask_kind;
  std::size_t mask_n = 0, mask_codes = 0, mask_block = 0, lookback = 2, lookahead = 1;
  std::string mask_format = "csv";
  auto* mask = app.add_subcommand("mask", "Dump an attention mask");
  mask->fallthrough();
  mask->add_option("kind", mask_kind, "causal | audio | dit")->required();
  mask->add_option("--n", mask_n, "Sequence length (causal, audio)");
  mask->add_option("--codes", mask_codes, "Number of codes (dit)");
  mask->add_option("--block", mask_block, "Block size (audio: 50, dit: 4)");
  mask->add_option("--lookback", lookback, "Blocks of lookback (dit)");
  mask->add_option("--lookahead", lookahead, "Blocks of lookahead (dit)");
  mask->add_option("--format", mask_format, "csv | pgm")->check(CLI::IsMember({"csv", "pgm"}));

  auto* generate = app.add_subcommand("generate", "Stream text tokens and speech codes as JSON lines");
  generate->fallthrough();
  generate->add_option("manifest", manifest)->required();

  std::string codes_path;
  bool offline = false, offline_diff = false;
  auto* decode = app.add_subcommand("decode", "Decode speech codes to mel frames and waveform");
  decode->fallthrough();
  decode->add_option("codes", codes_path, "JSON-lines speech codes")->required();
  decode->add_flag("--offline", offline, "Use the full-sequence reference decoder");
  decode->add_flag("--offline-diff", offline_diff, "Run both paths and report max abs difference");

  auto* latency = app.add_subcommand("latency", "First-packet latency breakdown of a generation");
  latency->fallthrough();
  latency->add_option("manifest", manifest)->required();

  std::string triplets_path;
  auto* dpo = app.add_subcommand("dpo-demo", "Evaluate preference losses for CSV triplets");
  dpo->fallthrough();
  dpo->add_option("triplets", triplets_path,
                  "CSV rows: lp_policy_w,lp_policy_l,lp_ref_w,lp_ref_l,beta")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, x;
    const int code = app.exit(e, o, x);
    out << o.str();
    err << x.str();
    return code;
  }

  try {
    const RunConfig cfg = g.config();

    if (*pack) {
      Sink sink(g, "positions.csv", out);
      write_positions_csv(sink.stream(), pack_manifest(manifest));
    } else if (*mask) {
      AttentionMask m;
      if (mask_kind == "causal") {
        if (mask_n < 1) throw UsageError("mask causal needs --n >= 1");
        m = causal_mask(mask_n);
      } else if (mask_kind == "audio") {
        if (mask_n < 1) throw UsageError("mask audio needs --n >= 1");
        m = audio_block_mask(mask_n, mask_block ? mask_block : kAudioFramesPerBlock);
      } else if (mask_kind == "dit") {
        if (mask_codes < 1) throw UsageError("mask dit needs --codes >= 1");
        m = dit_window_mask(mask_codes, mask_block ? mask_block : cfg.codec.block_size, lookback,
                            lookahead);
      } else {
        throw UsageError("unknown mask kind '" + mask_kind + "' (expected causal, audio or dit)");
      }
      Sink sink(g, "mask." + mask_format, out);
      if (mask_format == "pgm")
        write_mask_pgm(sink.stream(), m);
      else
        write_mask_csv(sink.stream(), m);
    } else if (*generate) {
      const auto gen = run_generation(cfg, manifest);
      Sink sink(g, "events.jsonl", out);
      write_events_jsonl(sink.stream(), gen.result.events);
      err << json{{"text_truncated", gen.result.text_truncated},
                  {"speech_truncated", gen.result.speech_truncated},
                  {"prefill_chunks", gen.result.prefill_chunks}}
                 .dump()
          << '\n';
    } else if (*decode) {
      CodeBlockStream stream{read_codes(codes_path), cfg.codec.block_size};
      if (stream.codes.empty()) throw std::invalid_argument("no speech codes in '" + codes_path + "'");
      const auto dp = MelDecoderParams::init(cfg.dims.speech_vocab, cfg.decoder_seed());
      const auto vp = VocoderParams::init(cfg.codec.receptive_field, cfg.vocoder_seed());
      json summary{{"codes", stream.codes.size()}, {"blocks", stream.n_blocks()}};

      std::vector<MelFrame> mel;
      std::vector<double> wave;
      if (offline) {
        mel = offline_decode(stream, dp);
        wave = vocode(mel, vp);
        summary["path"] = "offline";
      } else {
        const auto chunks = stream_decode(stream, dp);
        mel = concat_frames(chunks);
        wave = stream_vocode(mel, vp, cfg.codec.vocoder_chunk_frames);
        summary["path"] = "streaming";
        summary["chunks"] = chunks.size();
      }
      if (offline_diff) {
        const auto ref_mel = offline_decode(stream, dp);
        const auto ref_wave = vocode(ref_mel, vp);
        const auto str_mel = concat_frames(stream_decode(stream, dp));
        const auto str_wave = stream_vocode(str_mel, vp, cfg.codec.vocoder_chunk_frames);
        summary["mel_max_abs_diff"] = max_abs_diff(ref_mel, str_mel);
        summary["waveform_max_abs_diff"] = max_abs_diff(ref_wave, str_wave);
      }
      summary["frames"] = mel.size();
      summary["samples"] = wave.size();
      if (!g.out_dir.empty()) {
        Sink mel_sink(g, "mel.csv", out);
        write_mel_csv(mel_sink.stream(), mel);
        Sink wave_sink(g, "waveform.csv", out);
        write_waveform_csv(wave_sink.stream(), wave);
      }
      out << summary.dump() << '\n';
    } else if (*latency) {
      const auto gen = run_generation(cfg, manifest);
      const auto trace = build_pipeline_trace(gen.result, cfg.dims, cfg.codec.block_size);
      Sink sink(g, "latency.jsonl", out);
      sink.stream() << latency_json(first_packet_latency(trace, cfg.costs)).dump() << '\n';
    } else if (*dpo) {
      Sink sink(g, "dpo.jsonl", out);
      std::size_t row_no = 0;
      for (const auto& row : read_csv_rows(triplets_path)) {
        ++row_no;
        if (row.size() != 5)
          throw std::invalid_argument("triplet row " + std::to_string(row_no) + " needs 5 columns");
        DpoTriplet t;
        try {
          t = {std::stod(row[0]), std::stod(row[1]), std::stod(row[2]), std::stod(row[3]),
               std::stod(row[4])};
        } catch (const std::logic_error&) {
          // Header lines are skipped.
          if (row_no == 1) continue;
          throw std::invalid_argument("triplet row " + std::to_string(row_no) + " is not numeric");
        }
        const auto grad = dpo_gradient(t);
        const double h = 1e-5;
        auto fd = [&](double DpoTriplet::*field) {
          DpoTriplet up = t, dn = t;
          up.*field += h;
          dn.*field -= h;
          return (dpo_loss(up) - dpo_loss(dn)) / (2 * h);
        };
        json j{{"row", row_no},
               {"loss", dpo_loss(t)},
               {"margin", t.margin()},
               {"grad_policy_w", grad.d_policy_w},
               {"grad_policy_l", grad.d_policy_l},
               {"fd_policy_w", fd(&DpoTriplet::lp_policy_w)},
               {"fd_policy_l", fd(&DpoTriplet::lp_policy_l)}};
        sink.stream() << j.dump() << '\n';
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace omni::cli
