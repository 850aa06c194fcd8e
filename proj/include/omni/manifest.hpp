#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omni/sequencer.hpp"

namespace omni {

/// Raised for malformed manifest input; `line()` is 1-based.
class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses a line-oriented manifest into packable segments.
///
///   text;n=3
///   audio;frames=50[;start=0]
///   image;grid=2x3
///   video;times=0,500,1000;grid=2x2[;audio=75[;audio_start=0]]
///
/// Blank lines and lines starting with '#' are ignored. A video line expands
/// to its frames (interleaved with its audio track when `audio` is given);
/// each video line gets its own clock group.
std::vector<ModalitySegment> parse_manifest(std::string_view text);

/// Writes `index,kind,t,h,w` rows with a header line.
void write_positions_csv(std::ostream& os, const PackedSequence& packed);

}  // namespace omni
