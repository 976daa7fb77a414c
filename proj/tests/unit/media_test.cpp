#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "scout/media.hpp"
#include "scout/mock_endpoint.hpp"
#include "support.hpp"

using namespace scout;
namespace st = scout::testing;
namespace fs = std::filesystem;

TEST(Image, ProbeFormats) {
  const auto png = st::encode_image(30, 20, ".png");
  const auto jpg = st::encode_image(31, 21, ".jpg");
  auto p = probe_image(as_bytes(png));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->format, ImageFormat::Png);
  EXPECT_EQ(p->width, 30);
  EXPECT_EQ(p->height, 20);
  p = probe_image(as_bytes(jpg));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->format, ImageFormat::Jpeg);
  EXPECT_EQ(p->width, 31);
  EXPECT_EQ(p->height, 21);
  EXPECT_FALSE(probe_image(as_bytes("nope")));
}

TEST(Image, SmallImagePassesThrough) {
  const auto png = st::encode_image(40, 30, ".png");
  const auto a = prepare_image(as_bytes(png), 1024);
  EXPECT_FALSE(a.downscaled);
  EXPECT_EQ(a.mime, "image/png");
  const auto back = base64_decode(a.payload_base64);
  EXPECT_EQ(std::string(back.begin(), back.end()), png);
}

TEST(Image, UndecodableThrows) {
  try {
    prepare_image(as_bytes(std::string("\x89PNG\r\n\x1a\n garbage", 17)), 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UndecodableImage);
  }
}

// A 2x1 GIF with a red and a blue pixel, hand-assembled.
TEST(Image, GifFirstFrame) {
  std::string g = "GIF89a";
  g += std::string("\x02\x00\x01\x00\x80\x00\x00", 7);  // 2x1, global table of 2
  g += std::string("\xff\x00\x00\x00\x00\xff", 6);
  g += std::string("\x2c\x00\x00\x00\x00\x02\x00\x01\x00\x00", 10);
  // LZW min code size 2: clear(4), 0, 1, end(5) packed LSB first in 3-bit codes.
  g += std::string("\x02\x02\x44\x0a\x00\x3b", 6);
  const auto img = decode_gif_first_frame(as_bytes(g));
  ASSERT_TRUE(img);
  ASSERT_EQ(img->width, 2);
  ASSERT_EQ(img->height, 1);
  EXPECT_EQ(img->pixels[0], 255);
  EXPECT_EQ(img->pixels[2], 0);
  EXPECT_EQ(img->pixels[4], 0);
  EXPECT_EQ(img->pixels[6], 255);
  const auto a = prepare_image(as_bytes(g), 1);
  EXPECT_TRUE(a.downscaled);
  EXPECT_EQ(a.mime, "image/png");
}

// Property: the cap holds and aspect ratio is kept within rounding.
TEST(ImageProperty, CapAndAspect) {
  std::mt19937 rng(8);
  for (int i = 0; i < 5000; ++i) {
    const int w = 1 + rng() % 8000, h = 1 + rng() % 8000, cap = 16 + rng() % 2000;
    const auto [sw, sh] = scaled_dimensions(w, h, cap);
    ASSERT_LE(std::max(sw, sh), cap);
    ASSERT_GE(std::min(sw, sh), 1);
    if (std::max(w, h) <= cap) {
      ASSERT_EQ(sw, w);
      ASSERT_EQ(sh, h);
    } else {
      ASSERT_EQ(std::max(sw, sh), cap);
      // Sides that would round below one pixel are clamped to one.
      if (static_cast<double>(std::min(w, h)) * cap / std::max(w, h) < 1) continue;
      // The short side is the exact proportion rounded to a whole pixel.
      const double exact = static_cast<double>(std::min(w, h)) * cap / std::max(w, h);
      ASSERT_LE(std::abs(std::min(sw, sh) - exact), 0.5 + 1e-9);
    }
  }
}

TEST(Image, DownscaleDecodes) {
  const auto jpg = st::encode_image(1200, 300, ".jpg");
  const auto a = prepare_image(as_bytes(jpg), 400);
  EXPECT_TRUE(a.downscaled);
  EXPECT_EQ(a.width, 400);
  EXPECT_EQ(a.height, 100);
  const auto bytes = base64_decode(a.payload_base64);
  const auto p = probe_image(ByteView(bytes));
  ASSERT_TRUE(p);
  EXPECT_EQ(p->width, 400);
  EXPECT_EQ(p->height, 100);
}

TEST(Video, SegmentsCoverDuration) {
  for (double d : {0.5, 10.0, 1500.0, 1500.1, 4000.0}) {
    const auto segs = plan_segments(d, 1500);
    ASSERT_FALSE(segs.empty());
    EXPECT_EQ(segs.front().start_s, 0);
    EXPECT_DOUBLE_EQ(segs.back().end_s, d);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      EXPECT_LE(segs[i].end_s - segs[i].start_s, 1500);
      EXPECT_LT(segs[i].start_s, segs[i].end_s);
      if (i) EXPECT_EQ(segs[i].start_s, segs[i - 1].end_s);
    }
  }
}

// Property: random durations and caps are covered without gaps.
TEST(VideoProperty, Coverage) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> dur(0.01, 20000), cap(1, 3000);
  for (int i = 0; i < 2000; ++i) {
    const double d = dur(rng), c = cap(rng);
    const auto segs = plan_segments(d, c);
    ASSERT_EQ(segs.front().start_s, 0);
    ASSERT_DOUBLE_EQ(segs.back().end_s, d);
    for (std::size_t k = 1; k < segs.size(); ++k) ASSERT_EQ(segs[k].start_s, segs[k - 1].end_s);
    for (const auto& s : segs) ASSERT_LE(s.end_s - s.start_s, c + 1e-9);
  }
}

TEST(Video, DurationFromContainer) {
  st::TempDir dir;
  st::write_test_video(dir / "v.mp4", 3.0, 10);
  std::ifstream in(dir / "v.mp4", std::ios::binary);
  const auto d = mp4_duration(in);
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 3.0, 0.15);

  const auto whole = prepare_video(dir / "v.mp4", 1500);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole[0].mime, "video/mp4");
  const auto parts = prepare_video(dir / "v.mp4", 1.0);
  EXPECT_EQ(parts.size(), 3u);

  const auto frames = sample_video_frames(parts[1], 0.5, 64, 32);
  ASSERT_FALSE(frames.empty());
  for (const auto& f : frames) {
    EXPECT_EQ(f.mime, "image/jpeg");
    EXPECT_LE(std::max(*f.width, *f.height), 32);
    EXPECT_GE(*f.segment_start_s, parts[1].segment_start_s.value() - 1e-9);
    EXPECT_LT(*f.segment_start_s, parts[1].segment_end_s.value());
  }
}

TEST(Video, NotAContainer) {
  st::TempDir dir;
  st::write_bytes(dir / "v.mp4", "definitely not mp4");
  try {
    prepare_video(dir / "v.mp4", 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnreadableContainer);
  }
}

TEST(Asr, ParseTranscription) {
  const auto t = parse_transcription(
      R"({"text":" hi there ","language":"en","segments":[{"start":2,"end":4,"text":"there"},{"start":0,"end":2.5,"text":"hi"}]})",
      "w");
  EXPECT_EQ(t.language, "en");
  ASSERT_EQ(t.segments.size(), 2u);
  EXPECT_EQ(t.segments[0].text, "hi");
  EXPECT_LE(t.segments[0].end_s, t.segments[1].start_s);
  EXPECT_THROW(parse_transcription(R"({"text":"   "})", "w"), Error);
}

TEST(Asr, AgainstMockServer) {
  MockModelServer server({.asr_text = "the package arrives tuesday"});
  server.start();
  st::TempDir dir;
  st::write_bytes(dir / "a.wav", "RIFF....WAVE");
  const auto t = transcribe_audio(dir / "a.wav", {.url = server.asr_url(), .model = "m"});
  EXPECT_EQ(t.text, "the package arrives tuesday");
  EXPECT_EQ(server.asr_calls(), 1);

  st::write_bytes(dir / "empty.wav", "");
  try {
    transcribe_audio(dir / "empty.wav", {.url = server.asr_url()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AsrRejected);
  }
  server.stop();
}

TEST(Asr, UnreachableEndpoint) {
  st::TempDir dir;
  st::write_bytes(dir / "a.wav", "RIFF....WAVE");
  try {
    transcribe_audio(dir / "a.wav", {.url = "http://127.0.0.1:1/v1/audio/transcriptions", .timeout_s = 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EndpointUnreachable);
  }
}
