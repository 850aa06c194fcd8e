#include "omni/manifest.hpp"

#include <charconv>
#include <map>
#include <ostream>
#include <sstream>

namespace omni {

ManifestError::ManifestError(std::size_t line, const std::string& what)
    : std::runtime_error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    parts.push_back(trim(s.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

struct LineParser {
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw ManifestError(line, what); }

  std::int64_t integer(std::string_view s, std::string_view key) const {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || s.empty())
      fail("'" + std::string(key) + "' expects an integer, got '" + std::string(s) + "'");
    return v;
  }

  double real(std::string_view s, std::string_view key) const {
    // from_chars for double is missing on older libstdc++; istringstream is enough here.
    std::istringstream is{std::string(s)};
    double v = 0.0;
    is >> v;
    if (s.empty() || !is || !is.eof())
      fail("'" + std::string(key) + "' expects a number, got '" + std::string(s) + "'");
    return v;
  }

  Grid grid(std::string_view s) const {
    const auto x = s.find('x');
    if (x == std::string_view::npos) fail("grid must look like ROWSxCOLS");
    return {integer(s.substr(0, x), "grid"), integer(s.substr(x + 1), "grid")};
  }
};

}  // namespace

std::vector<ModalitySegment> parse_manifest(std::string_view text) {
  std::vector<ModalitySegment> segments;
  int next_group = 0;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const LineParser p{line_no};

    const auto fields = split(line, ';');
    const std::string_view kind = fields.front();
    std::map<std::string, std::string_view, std::less<>> kv;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string_view::npos) p.fail("expected key=value, got '" + std::string(fields[i]) + "'");
      kv.emplace(std::string(trim(fields[i].substr(0, eq))), trim(fields[i].substr(eq + 1)));
    }
    auto take = [&](std::string_view key) -> std::optional<std::string_view> {
      auto it = kv.find(key);
      if (it == kv.end()) return std::nullopt;
      auto v = it->second;
      kv.erase(it);
      return v;
    };
    auto need = [&](std::string_view key) {
      auto v = take(key);
      if (!v) p.fail(std::string(kind) + " needs '" + std::string(key) + "'");
      return *v;
    };

    try {
      if (kind == "text") {
        segments.push_back(ModalitySegment::text(p.integer(need("n"), "n")));
      } else if (kind == "audio") {
        const auto frames = p.integer(need("frames"), "frames");
        const auto start = take("start");
        segments.push_back(ModalitySegment::audio(frames, start ? p.real(*start, "start") : 0.0));
      } else if (kind == "image") {
        const Grid g = p.grid(need("grid"));
        segments.push_back(ModalitySegment::image(g.rows, g.cols));
      } else if (kind == "video") {
        const Grid g = p.grid(need("grid"));
        std::vector<ModalitySegment> frames;
        for (auto t : split(need("times"), ','))
          frames.push_back(ModalitySegment::video_frame(g.rows, g.cols, p.real(t, "times")));
        std::optional<ModalitySegment> audio;
        if (auto a = take("audio")) {
          const auto start = take("audio_start");
          audio = ModalitySegment::audio(p.integer(*a, "audio"),
                                         start ? p.real(*start, "audio_start") : 0.0);
        }
        for (std::size_t i = 1; i < frames.size(); ++i)
          if (!(*frames[i].time_ms > *frames[i - 1].time_ms))
            p.fail("video times must be strictly increasing");
        auto span = interleave_video_audio(frames, audio, kInterleaveChunkMs, next_group++);
        segments.insert(segments.end(), span.begin(), span.end());
      } else {
        p.fail("unknown segment kind '" + std::string(kind) + "'");
      }
      if (!kv.empty()) p.fail("unknown key '" + kv.begin()->first + "'");
      segments.back().validate();
    } catch (const std::invalid_argument& e) {
      p.fail(e.what());
    }
  }
  return segments;
}

void write_positions_csv(std::ostream& os, const PackedSequence& packed) {
  os << "index,kind,t,h,w\n";
  for (std::size_t i = 0; i < packed.elements.size(); ++i) {
    const auto& e = packed.elements[i];
    os << i << ',' << to_string(e.kind) << ',' << e.pos.t << ',' << e.pos.h << ',' << e.pos.w
       << '\n';
  }
}

}  // namespace omni
