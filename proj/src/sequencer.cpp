#include "omni/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace omni {

std::string_view to_string(Modality kind) {
  switch (kind) {
    case Modality::Text: return "text";
    case Modality::Audio: return "audio";
    case Modality::Image: return "image";
    case Modality::VideoFrame: return "video";
  }
  return "unknown";
}

std::int64_t PositionTriple::max_component() const { return std::max({t, h, w}); }
std::int64_t PositionTriple::min_component() const { return std::min({t, h, w}); }

ModalitySegment ModalitySegment::text(std::int64_t n) {
  ModalitySegment s;
  s.kind = Modality::Text;
  s.length = n;
  return s;
}

ModalitySegment ModalitySegment::audio(std::int64_t n_frames, double start_ms) {
  ModalitySegment s;
  s.kind = Modality::Audio;
  s.length = n_frames;
  s.time_ms = start_ms;
  return s;
}

ModalitySegment ModalitySegment::image(std::int64_t rows, std::int64_t cols) {
  ModalitySegment s;
  s.kind = Modality::Image;
  s.length = rows * cols;
  s.grid = Grid{rows, cols};
  return s;
}

ModalitySegment ModalitySegment::video_frame(std::int64_t rows, std::int64_t cols,
                                             double time_ms) {
  ModalitySegment s;
  s.kind = Modality::VideoFrame;
  s.length = rows * cols;
  s.grid = Grid{rows, cols};
  s.time_ms = time_ms;
  return s;
}

void ModalitySegment::validate() const {
  if (length < 1) throw std::invalid_argument("segment length must be >= 1");
  const bool visual = kind == Modality::Image || kind == Modality::VideoFrame;
  if (visual) {
    if (!grid || grid->rows < 1 || grid->cols < 1)
      throw std::invalid_argument("visual segment needs a non-empty grid");
    if (grid->rows * grid->cols != length)
      throw std::invalid_argument("visual segment length must equal rows x cols");
  }
  const bool timed = kind == Modality::Audio || kind == Modality::VideoFrame;
  if (timed && !time_ms) throw std::invalid_argument("timed segment needs time_ms");
  if (time_ms && !(*time_ms >= 0.0)) throw std::invalid_argument("time_ms must be >= 0");
  if (kind == Modality::Audio && frame_ms != kAudioFrameMs)
    throw std::invalid_argument("audio frames are 40 ms");
}

std::vector<PositionTriple> PackedSequence::triples() const {
  std::vector<PositionTriple> out;
  out.reserve(elements.size());
  for (const auto& e : elements) out.push_back(e.pos);
  return out;
}

std::int64_t temporal_id_for(double offset_ms) {
  return static_cast<std::int64_t>(std::floor(offset_ms / kMsPerTemporalId + 0.5));
}

namespace {

void check_start(std::int64_t start) {
  if (start < 0) throw std::invalid_argument("start position must be >= 0");
}

std::vector<PositionTriple> identical_run(std::int64_t n, std::int64_t start) {
  if (n < 0) throw std::invalid_argument("element count must be >= 0");
  check_start(start);
  std::vector<PositionTriple> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out.push_back({start + i, start + i, start + i});
  return out;
}

void append_grid(std::vector<PositionTriple>& out, std::int64_t t, std::int64_t rows,
                 std::int64_t cols, std::int64_t origin) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) out.push_back({t, origin + r, origin + c});
}

}  // namespace

std::vector<PositionTriple> assign_text_positions(std::int64_t n, std::int64_t start) {
  return identical_run(n, start);
}

std::vector<PositionTriple> assign_audio_positions(std::int64_t n_frames,
                                                   std::int64_t start) {
  return identical_run(n_frames, start);
}

std::vector<PositionTriple> assign_image_positions(std::int64_t rows, std::int64_t cols,
                                                   std::int64_t start) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("image grid must be non-empty");
  check_start(start);
  std::vector<PositionTriple> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  append_grid(out, start, rows, cols, start);
  return out;
}

std::vector<VideoFramePositions> assign_video_positions(
    const std::vector<double>& frame_times_ms, std::int64_t rows, std::int64_t cols,
    std::int64_t start) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("video grid must be non-empty");
  check_start(start);
  std::vector<VideoFramePositions> out;
  out.reserve(frame_times_ms.size());
  for (std::size_t i = 0; i < frame_times_ms.size(); ++i) {
    const double tau = frame_times_ms[i];
    if (!(tau >= 0.0)) throw std::invalid_argument("frame times must be >= 0");
    if (i > 0 && !(tau > frame_times_ms[i - 1]))
      throw std::invalid_argument("frame times must be strictly increasing");
    VideoFramePositions frame;
    frame.temporal_id = start + temporal_id_for(tau);
    frame.tokens.reserve(static_cast<std::size_t>(rows * cols));
    append_grid(frame.tokens, frame.temporal_id, rows, cols, start);
    out.push_back(std::move(frame));
  }
  return out;
}

std::vector<ModalitySegment> image_as_video(const ModalitySegment& image) {
  if (image.kind != Modality::Image)
    throw std::invalid_argument("image_as_video expects an image segment");
  image.validate();
  const Grid g = *image.grid;
  auto first = ModalitySegment::video_frame(g.rows, g.cols, 0.0);
  auto second = ModalitySegment::video_frame(g.rows, g.cols, kMsPerTemporalId);
  first.group = image.group;
  second.group = image.group;
  return {first, second};
}

std::vector<ModalitySegment> interleave_video_audio(
    const std::vector<ModalitySegment>& video_frames,
    const std::optional<ModalitySegment>& audio, double chunk_ms, int group) {
  if (!(chunk_ms > 0.0)) throw std::invalid_argument("chunk_ms must be positive");
  if (video_frames.empty() && !audio)
    throw std::invalid_argument("interleaving needs video or audio");

  std::vector<ModalitySegment> frames = video_frames;
  for (const auto& f : frames) {
    if (f.kind != Modality::VideoFrame)
      throw std::invalid_argument("interleave expects video frames");
    f.validate();
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return *a.time_ms < *b.time_ms; });
  if (audio) {
    if (audio->kind != Modality::Audio)
      throw std::invalid_argument("interleave expects an audio segment");
    audio->validate();
  }

  auto window_of = [chunk_ms](double t) {
    return static_cast<std::int64_t>(std::floor(t / chunk_ms));
  };

  // window -> (video frame indices, [first, last) audio frame indices)
  struct Window {
    std::vector<std::size_t> video;
    std::int64_t audio_begin = -1;
    std::int64_t audio_end = -1;
  };
  std::map<std::int64_t, Window> windows;
  for (std::size_t i = 0; i < frames.size(); ++i)
    windows[window_of(*frames[i].time_ms)].video.push_back(i);
  if (audio) {
    for (std::int64_t i = 0; i < audio->length; ++i) {
      auto& w = windows[window_of(*audio->time_ms + static_cast<double>(i) * audio->frame_ms)];
      if (w.audio_begin < 0) w.audio_begin = i;
      w.audio_end = i + 1;
    }
  }

  std::vector<ModalitySegment> out;
  for (const auto& [k, w] : windows) {
    for (std::size_t i : w.video) {
      ModalitySegment f = frames[i];
      f.group = group;
      out.push_back(std::move(f));
    }
    if (w.audio_begin >= 0) {
      ModalitySegment piece = ModalitySegment::audio(
          w.audio_end - w.audio_begin,
          *audio->time_ms + static_cast<double>(w.audio_begin) * audio->frame_ms);
      piece.group = group;
      out.push_back(std::move(piece));
    }
  }
  return out;
}

PackedSequence pack_sequence(const std::vector<ModalitySegment>& segments) {
  if (segments.empty()) throw std::invalid_argument("pack_sequence needs segments");
  for (const auto& s : segments) s.validate();

  PackedSequence packed;
  std::int64_t next_start = 0;
  std::size_t i = 0;
  while (i < segments.size()) {
    // A span is one ungrouped segment or a maximal run sharing a group tag.
    std::size_t end = i + 1;
    if (segments[i].group)
      while (end < segments.size() && segments[end].group == segments[i].group) ++end;

    const std::int64_t base = next_start;
    std::int64_t span_max = base;
    auto emit = [&](Modality kind, const std::vector<PositionTriple>& triples,
                    std::size_t seg) {
      for (const auto& p : triples) {
        packed.elements.push_back({kind, p, seg});
        span_max = std::max(span_max, p.max_component());
      }
    };

    const bool clocked = end - i > 1 || segments[i].kind == Modality::VideoFrame;
    if (!clocked) {
      const auto& s = segments[i];
      switch (s.kind) {
        case Modality::Text: emit(s.kind, assign_text_positions(s.length, base), i); break;
        case Modality::Audio: emit(s.kind, assign_audio_positions(s.length, base), i); break;
        case Modality::Image:
          emit(s.kind, assign_image_positions(s.grid->rows, s.grid->cols, base), i);
          break;
        case Modality::VideoFrame: break;
      }
    } else {
      double anchor = 0.0;
      bool have_anchor = false;
      for (std::size_t j = i; j < end; ++j) {
        const auto& s = segments[j];
        if (!s.time_ms)
          throw std::invalid_argument("grouped segments must all carry timestamps");
        if (s.kind != Modality::Audio && s.kind != Modality::VideoFrame)
          throw std::invalid_argument("only audio and video frames can share a clock");
        anchor = have_anchor ? std::min(anchor, *s.time_ms) : *s.time_ms;
        have_anchor = true;
      }
      for (std::size_t j = i; j < end; ++j) {
        const auto& s = segments[j];
        if (s.kind == Modality::VideoFrame) {
          auto frames = assign_video_positions({*s.time_ms - anchor}, s.grid->rows,
                                               s.grid->cols, base);
          emit(s.kind, frames.front().tokens, j);
        } else {
          std::vector<PositionTriple> triples;
          triples.reserve(static_cast<std::size_t>(s.length));
          for (std::int64_t f = 0; f < s.length; ++f) {
            const std::int64_t t =
                base + temporal_id_for(*s.time_ms - anchor + static_cast<double>(f) * s.frame_ms);
            triples.push_back({t, t, t});
          }
          emit(s.kind, triples, j);
        }
      }
    }
    packed.max_position = span_max;
    next_start = span_max + 1;
    i = end;
  }
  return packed;
}

}  // namespace omni
