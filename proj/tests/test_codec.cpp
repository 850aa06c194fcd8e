#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "omni/codec.hpp"

namespace omni {
namespace {

std::vector<int> random_codes(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
  std::uniform_int_distribution<int> c(0, static_cast<int>(vocab) - 1);
  std::vector<int> v(n);
  for (auto& x : v) x = c(rng);
  return v;
}

double max_abs_diff(const std::vector<MelFrame>& a, const std::vector<MelFrame>& b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
  return m;
}

std::vector<MelFrame> random_mel(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<MelFrame> mel(n, MelFrame(kMelChannels));
  for (auto& f : mel)
    for (Eigen::Index c = 0; c < f.size(); ++c) f(c) = g(rng);
  return mel;
}

const MelDecoderParams& decoder() {
  static const MelDecoderParams p = MelDecoderParams::init(32, 7);
  return p;
}

TEST(MelGeometry, HopAndWindow) {
  EXPECT_EQ(kSamplesPerFrame, static_cast<std::size_t>(kSampleRate * kMelHopMs / 1000.0));
  EXPECT_EQ(kMelWindowMs, 25.0);
  EXPECT_EQ(kMelChannels, 128u);
}

TEST(DecodeBlock, ShapesAndRange) {
  const CodeBlockStream s{{1, 2, 3, 4, 5, 6}, 4};
  const auto c0 = decode_block(s, 0, decoder());
  const auto c1 = decode_block(s, 1, decoder());
  EXPECT_EQ(c0.frames.size(), 4u * decoder().frames_per_code);
  EXPECT_EQ(c1.frames.size(), 2u * decoder().frames_per_code);
  EXPECT_EQ(c0.frames[0].size(), static_cast<Eigen::Index>(kMelChannels));
  EXPECT_THROW(decode_block(s, 2, decoder()), std::out_of_range);
  const CodeBlockStream bad{{99}, 4};
  EXPECT_THROW(decode_block(bad, 0, decoder()), std::out_of_range);
}

TEST(DecodeBlock, BlockThreeBackIsOutsideTheWindow) {
  std::mt19937_64 rng(1);
  CodeBlockStream s{random_codes(rng, 24, 32), 4};
  const std::size_t k = 4;
  const auto base = decode_block(s, k, decoder());
  auto far = s;
  far.codes[(k - 3) * 4 + 1] = (far.codes[(k - 3) * 4 + 1] + 1) % 32;
  EXPECT_EQ(decode_block(far, k, decoder()), base);
  auto ahead = s;
  ahead.codes[(k + 1) * 4 + 2] = (ahead.codes[(k + 1) * 4 + 2] + 1) % 32;
  EXPECT_FALSE(decode_block(ahead, k, decoder()) == base);
}

TEST(DecodeBlock, SingleBlockEqualsOffline) {
  const CodeBlockStream s{{3, 1, 4}, 4};
  EXPECT_EQ(decode_block(s, 0, decoder()).frames, offline_decode(s, decoder()));
}

TEST(StreamDecode, EqualsOfflineExactly) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> len(1, 40), block(1, 6);
  for (int trial = 0; trial < 30; ++trial) {
    const CodeBlockStream s{random_codes(rng, len(rng), 32), block(rng)};
    const auto chunks = stream_decode(s, decoder());
    EXPECT_EQ(chunks.size(), s.n_blocks());
    EXPECT_EQ(max_abs_diff(concat_frames(chunks), offline_decode(s, decoder())), 0.0);
  }
}

TEST(StreamDecode, ChunkKWaitsForOneBlockOfLookahead) {
  std::mt19937_64 rng(3);
  const CodeBlockStream s{random_codes(rng, 20, 32), 4};
  const auto chunks = stream_decode(s, decoder());
  ASSERT_EQ(chunks.size(), 5u);
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    EXPECT_EQ(chunks[k].chunk.block, k);
    EXPECT_EQ(chunks[k].newest_block, std::min(k + 1, s.n_blocks() - 1));
  }
  const CodeBlockStream one{{5, 6}, 4};
  EXPECT_EQ(stream_decode(one, decoder()).size(), 1u);
}

TEST(StreamingMelDecoder, ReleasesIncrementally) {
  StreamingMelDecoder dec(decoder(), 2);
  const std::vector<int> codes{1, 2, 3, 4, 5, 6, 7};
  EXPECT_TRUE(dec.push(std::span(codes).first(3)).empty());
  const auto first = dec.push(std::span(codes).subspan(3, 1));
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0].chunk.block, 0u);
  const auto second = dec.push(std::span(codes).subspan(4));
  ASSERT_EQ(second.size(), 1u);
  const auto rest = dec.finish();
  ASSERT_EQ(rest.size(), 2u);
  EXPECT_EQ(rest[1].chunk.block, 3u);
  EXPECT_TRUE(dec.finished());
  EXPECT_THROW(dec.push(codes), std::logic_error);
}

TEST(Vocoder, SingleFrameFieldIsAFramewiseMap) {
  const auto p = VocoderParams::init(1, 4);
  std::mt19937_64 rng(5);
  const auto mel = random_mel(rng, 9);
  const auto full = vocode(mel, p);
  ASSERT_EQ(full.size(), 9 * kSamplesPerFrame);
  for (std::size_t f = 0; f < mel.size(); ++f) {
    const Eigen::VectorXd want = (p.taps[0] * mel[f]).array().tanh();
    for (std::size_t s = 0; s < kSamplesPerFrame; ++s)
      EXPECT_NEAR(full[f * kSamplesPerFrame + s], want(static_cast<Eigen::Index>(s)), 1e-15);
  }
  StreamingVocoder sv(p);
  std::vector<double> chunked;
  for (std::size_t f = 0; f < mel.size(); ++f) {
    auto part = sv.push(std::span(mel).subspan(f, 1));
    chunked.insert(chunked.end(), part.begin(), part.end());
  }
  EXPECT_EQ(chunked, full);
}

TEST(Vocoder, ChunkedEqualsFullExactly) {
  const auto p = VocoderParams::init(8, 6);
  std::mt19937_64 rng(7);
  const auto mel = random_mel(rng, 23);
  const auto full = vocode(mel, p);
  for (std::size_t chunk : {1u, 3u, 5u, 8u, 23u}) {
    StreamingVocoder sv(p);
    std::vector<double> out;
    for (std::size_t f = 0; f < mel.size(); f += chunk) {
      const auto part = sv.push(std::span(mel).subspan(f, std::min(chunk, mel.size() - f)));
      out.insert(out.end(), part.begin(), part.end());
    }
    EXPECT_EQ(out, full) << chunk;
  }
}

TEST(Vocoder, ZeroMelGivesSilence) {
  const auto p = VocoderParams::init(8, 8);
  const std::vector<MelFrame> mel(6, MelFrame::Zero(kMelChannels));
  for (double s : vocode(mel, p)) EXPECT_EQ(s, 0.0);
  EXPECT_THROW(VocoderParams::init(0, 1), std::invalid_argument);
}

TEST(Vocoder, OutputDependsOnlyOnTheLastRFrames) {
  const auto p = VocoderParams::init(3, 9);
  std::mt19937_64 rng(10);
  auto mel = random_mel(rng, 10);
  const auto base = vocode(mel, p);
  mel[2](5) += 1.0;
  const auto changed = vocode(mel, p);
  for (std::size_t f = 0; f < 10; ++f) {
    const bool same = std::equal(base.begin() + static_cast<long>(f * kSamplesPerFrame),
                                 base.begin() + static_cast<long>((f + 1) * kSamplesPerFrame),
                                 changed.begin() + static_cast<long>(f * kSamplesPerFrame));
    EXPECT_EQ(same, f < 2 || f > 4) << f;
  }
}

TEST(CodecCsv, Headers) {
  std::ostringstream mel, wav;
  write_mel_csv(mel, std::vector<MelFrame>(1, MelFrame::Zero(kMelChannels)));
  EXPECT_EQ(mel.str().substr(0, 12), "frame,c0,c1,");
  write_waveform_csv(wav, std::vector<double>{0.5});
  EXPECT_EQ(wav.str(), "sample,value\n0,0.5\n");
}

}  // namespace
}  // namespace omni
