#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace omni {

/// Milliseconds of signal covered by one temporal position ID.
inline constexpr double kMsPerTemporalId = 40.0;
/// Duration of one audio-encoder frame.
inline constexpr double kAudioFrameMs = 40.0;
/// Window length used when interleaving video with its audio track.
inline constexpr double kInterleaveChunkMs = 2000.0;

enum class Modality { Text, Audio, Image, VideoFrame };

std::string_view to_string(Modality kind);

/// Position IDs of one sequence element along the temporal, height and
/// width rotary components.
struct PositionTriple {
  std::int64_t t = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  std::int64_t max_component() const;
  std::int64_t min_component() const;

  friend bool operator==(const PositionTriple&, const PositionTriple&) = default;
};

struct Grid {
  std::int64_t rows = 0;
  std::int64_t cols = 0;

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// A typed run of sequence elements.
///
/// Consecutive segments sharing the same `group` form one modality span with
/// a single temporal clock (a video, or a video interleaved with its audio).
/// Ungrouped segments are spans of their own.
struct ModalitySegment {
  Modality kind = Modality::Text;
  std::int64_t length = 0;
  std::optional<Grid> grid;
  std::optional<double> time_ms;
  double frame_ms = kAudioFrameMs;
  std::optional<int> group;

  static ModalitySegment text(std::int64_t n);
  static ModalitySegment audio(std::int64_t n_frames, double start_ms = 0.0);
  static ModalitySegment image(std::int64_t rows, std::int64_t cols);
  static ModalitySegment video_frame(std::int64_t rows, std::int64_t cols,
                                     double time_ms);

  /// Throws std::invalid_argument when the segment breaks its invariants.
  void validate() const;

  friend bool operator==(const ModalitySegment&, const ModalitySegment&) = default;
};

struct PackedElement {
  Modality kind = Modality::Text;
  PositionTriple pos;
  std::size_t segment = 0;

  friend bool operator==(const PackedElement&, const PackedElement&) = default;
};

struct PackedSequence {
  std::vector<PackedElement> elements;
  std::int64_t max_position = 0;

  std::size_t size() const { return elements.size(); }
  std::vector<PositionTriple> triples() const;

  friend bool operator==(const PackedSequence&, const PackedSequence&) = default;
};

struct VideoFramePositions {
  std::int64_t temporal_id = 0;
  std::vector<PositionTriple> tokens;
};

/// Rounds a millisecond offset to temporal IDs, halves rounding up.
std::int64_t temporal_id_for(double offset_ms);

std::vector<PositionTriple> assign_text_positions(std::int64_t n, std::int64_t start);
std::vector<PositionTriple> assign_audio_positions(std::int64_t n_frames,
                                                   std::int64_t start);
std::vector<PositionTriple> assign_image_positions(std::int64_t rows, std::int64_t cols,
                                                   std::int64_t start);

/// Frame at time τ gets temporal ID start + round(τ / 40). Height and width
/// IDs follow the image pattern anchored at `start`.
std::vector<VideoFramePositions> assign_video_positions(
    const std::vector<double>& frame_times_ms, std::int64_t rows, std::int64_t cols,
    std::int64_t start);

/// An image is fed to the vision path as two identical frames 40 ms apart.
std::vector<ModalitySegment> image_as_video(const ModalitySegment& image);

/// Splits the timeline into half-open windows of `chunk_ms` and emits, per
/// window, the video frames that fall inside it followed by the audio frames
/// that start inside it. Every output segment is tagged with `group`.
std::vector<ModalitySegment> interleave_video_audio(
    const std::vector<ModalitySegment>& video_frames,
    const std::optional<ModalitySegment>& audio, double chunk_ms = kInterleaveChunkMs,
    int group = 0);

PackedSequence pack_sequence(const std::vector<ModalitySegment>& segments);

}  // namespace omni
