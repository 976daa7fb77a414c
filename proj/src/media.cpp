#include "scout/media.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include "scout/http.hpp"

namespace scout {

namespace fs = std::filesystem;

// ---- ASR -------------------------------------------------------------------

Transcript parse_transcription(std::string_view json_body, std::string_view asr_model) {
  const auto j = nlohmann::json::parse(json_body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string())
    throw Error(ErrorCode::AsrRejected, "response lacks a text field");
  Transcript t;
  t.text = sanitize_utf8(trim(j["text"].get<std::string>()));
  t.asr_model = std::string(asr_model);
  if (j.contains("language") && j["language"].is_string()) t.language = j["language"].get<std::string>();
  if (j.contains("segments") && j["segments"].is_array()) {
    for (const auto& s : j["segments"]) {
      if (!s.is_object() || !s.contains("start") || !s.contains("end")) continue;
      if (!s["start"].is_number() || !s["end"].is_number()) continue;
      TranscriptSegment seg{s["start"].get<double>(), s["end"].get<double>(),
                            s.contains("text") && s["text"].is_string() ? trim(s["text"].get<std::string>()) : ""};
      if (std::isfinite(seg.start_s) && std::isfinite(seg.end_s) && seg.end_s >= seg.start_s)
        t.segments.push_back(std::move(seg));
    }
    std::stable_sort(t.segments.begin(), t.segments.end(),
                     [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
    std::vector<TranscriptSegment> clipped;
    for (auto& s : t.segments) {
      if (!clipped.empty() && s.start_s < clipped.back().end_s) s.start_s = clipped.back().end_s;
      if (s.end_s < s.start_s) continue;
      clipped.push_back(std::move(s));
    }
    t.segments = std::move(clipped);
  }
  if (t.text.empty()) throw Error(ErrorCode::EmptyTranscript, "transcription returned no text");
  return t;
}

Transcript transcribe_audio(const fs::path& path, const AsrEndpoint& endpoint) {
  if (endpoint.url.empty()) throw Error(ErrorCode::EndpointUnreachable, "no transcription endpoint configured");
  const auto bytes = read_file(path);
  if (bytes.empty()) throw Error(ErrorCode::AsrRejected, "0-byte audio file");
  const auto url = parse_http_url(endpoint.url);
  httplib::Client client(url.base);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(std::chrono::seconds(endpoint.timeout_s));
  httplib::MultipartFormDataItems items{
      {"file", std::string(bytes.begin(), bytes.end()), path.filename().string(), "application/octet-stream"},
      {"model", endpoint.model, "", ""},
  };
  auto res = client.Post(url.path, items);
  if (!res) throw Error(ErrorCode::EndpointUnreachable, endpoint.url + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::AsrRejected, "status " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
  return parse_transcription(res->body, endpoint.model);
}

// ---- images ----------------------------------------------------------------

std::string image_mime(ImageFormat f) {
  switch (f) {
    case ImageFormat::Jpeg: return "image/jpeg";
    case ImageFormat::Png: return "image/png";
    case ImageFormat::Gif: return "image/gif";
  }
  return "application/octet-stream";
}

std::optional<ImageInfo> probe_image(ByteView b) {
  auto be16 = [&](std::size_t o) { return (b[o] << 8) | b[o + 1]; };
  if (b.size() >= 24 && std::memcmp(b.data(), "\x89PNG\r\n\x1A\n", 8) == 0 && std::memcmp(b.data() + 12, "IHDR", 4) == 0) {
    const auto w = (static_cast<std::uint32_t>(b[16]) << 24) | (b[17] << 16) | (b[18] << 8) | b[19];
    const auto h = (static_cast<std::uint32_t>(b[20]) << 24) | (b[21] << 16) | (b[22] << 8) | b[23];
    if (w == 0 || h == 0 || w > 0x7FFFFFFF || h > 0x7FFFFFFF) return std::nullopt;
    return ImageInfo{ImageFormat::Png, static_cast<int>(w), static_cast<int>(h)};
  }
  if (b.size() >= 10 && (std::memcmp(b.data(), "GIF87a", 6) == 0 || std::memcmp(b.data(), "GIF89a", 6) == 0)) {
    const int w = b[6] | (b[7] << 8), h = b[8] | (b[9] << 8);
    if (w == 0 || h == 0) return std::nullopt;
    return ImageInfo{ImageFormat::Gif, w, h};
  }
  if (b.size() >= 4 && b[0] == 0xFF && b[1] == 0xD8) {
    std::size_t pos = 2;
    while (pos + 4 <= b.size()) {
      if (b[pos] != 0xFF) return std::nullopt;
      const std::uint8_t marker = b[pos + 1];
      if (marker == 0xFF) {
        ++pos;
        continue;
      }
      if (marker == 0xD8 || (marker >= 0xD0 && marker <= 0xD7) || marker == 0x01) {
        pos += 2;
        continue;
      }
      const std::size_t len = static_cast<std::size_t>(be16(pos + 2));
      if (len < 2) return std::nullopt;
      const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
      if (sof) {
        if (pos + 9 > b.size()) return std::nullopt;
        const int h = be16(pos + 5), w = be16(pos + 7);
        if (w == 0 || h == 0) return std::nullopt;
        return ImageInfo{ImageFormat::Jpeg, w, h};
      }
      pos += 2 + len;
    }
  }
  return std::nullopt;
}

std::pair<int, int> scaled_dimensions(int width, int height, int max_dim) {
  if (std::max(width, height) <= max_dim) return {width, height};
  if (width >= height) {
    const int h = std::max(1, static_cast<int>(std::lround(static_cast<double>(height) * max_dim / width)));
    return {max_dim, h};
  }
  const int w = std::max(1, static_cast<int>(std::lround(static_cast<double>(width) * max_dim / height)));
  return {w, max_dim};
}

std::optional<RgbaImage> decode_gif_first_frame(ByteView b) {
  if (b.size() < 13 || (std::memcmp(b.data(), "GIF87a", 6) != 0 && std::memcmp(b.data(), "GIF89a", 6) != 0))
    return std::nullopt;
  const int sw = b[6] | (b[7] << 8), sh = b[8] | (b[9] << 8);
  if (sw <= 0 || sh <= 0 || static_cast<long long>(sw) * sh > (1LL << 26)) return std::nullopt;
  std::size_t pos = 13;
  std::vector<std::uint8_t> palette;
  if (b[10] & 0x80) {
    const std::size_t n = 3u << ((b[10] & 7) + 1);
    if (pos + n > b.size()) return std::nullopt;
    palette.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  std::optional<std::uint8_t> transparent;
  while (pos < b.size()) {
    const std::uint8_t block = b[pos++];
    if (block == 0x3B) return std::nullopt;
    if (block == 0x21) {
      if (pos >= b.size()) return std::nullopt;
      const std::uint8_t label = b[pos++];
      if (label == 0xF9 && pos + 5 <= b.size() && b[pos] >= 4 && (b[pos + 1] & 1)) transparent = b[pos + 4];
      while (pos < b.size() && b[pos] != 0) pos += 1u + b[pos];
      ++pos;
      continue;
    }
    if (block != 0x2C || pos + 9 > b.size()) return std::nullopt;
    const int left = b[pos] | (b[pos + 1] << 8), top = b[pos + 2] | (b[pos + 3] << 8);
    const int w = b[pos + 4] | (b[pos + 5] << 8), h = b[pos + 6] | (b[pos + 7] << 8);
    const std::uint8_t flags = b[pos + 8];
    pos += 9;
    if (flags & 0x80) {
      const std::size_t n = 3u << ((flags & 7) + 1);
      if (pos + n > b.size()) return std::nullopt;
      palette.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + n));
      pos += n;
    }
    if (palette.empty() || pos >= b.size() || w <= 0 || h <= 0) return std::nullopt;
    const int min_code = b[pos++];
    if (min_code < 2 || min_code > 11) return std::nullopt;
    std::vector<std::uint8_t> data;
    while (pos < b.size() && b[pos] != 0) {
      const std::size_t n = b[pos];
      if (pos + 1 + n > b.size()) return std::nullopt;
      data.insert(data.end(), b.begin() + static_cast<std::ptrdiff_t>(pos + 1),
                  b.begin() + static_cast<std::ptrdiff_t>(pos + 1 + n));
      pos += 1 + n;
    }

    // LZW, codes packed LSB first.
    const std::size_t want = static_cast<std::size_t>(w) * h;
    std::vector<std::uint8_t> indices;
    indices.reserve(want);
    const int clear = 1 << min_code, eoi = clear + 1;
    std::vector<std::uint16_t> prefix(4096);
    std::vector<std::uint8_t> suffix(4096);
    for (int i = 0; i < clear; ++i) suffix[i] = static_cast<std::uint8_t>(i);
    std::vector<std::uint8_t> stack;
    int code_size = min_code + 1, next = eoi + 1, old = -1;
    std::uint8_t first = 0;
    std::size_t bitpos = 0;
    while (indices.size() < want) {
      if (bitpos + code_size > data.size() * 8) break;
      int code = 0;
      for (int k = 0; k < code_size; ++k, ++bitpos)
        code |= ((data[bitpos >> 3] >> (bitpos & 7)) & 1) << k;
      if (code == clear) {
        code_size = min_code + 1;
        next = eoi + 1;
        old = -1;
        continue;
      }
      if (code == eoi) break;
      if (old < 0) {
        if (code >= clear) return std::nullopt;
        indices.push_back(static_cast<std::uint8_t>(code));
        old = code;
        first = static_cast<std::uint8_t>(code);
        continue;
      }
      const int in = code;
      stack.clear();
      if (code >= next) {
        if (code > next) return std::nullopt;
        stack.push_back(first);
        code = old;
      }
      while (code > eoi) {
        stack.push_back(suffix[code]);
        code = prefix[code];
      }
      if (code >= clear) return std::nullopt;
      first = static_cast<std::uint8_t>(code);
      stack.push_back(first);
      for (auto it = stack.rbegin(); it != stack.rend() && indices.size() < want; ++it) indices.push_back(*it);
      if (next < 4096) {
        prefix[next] = static_cast<std::uint16_t>(old);
        suffix[next] = first;
        ++next;
        if (next == (1 << code_size) && code_size < 12) ++code_size;
      }
      old = in;
    }
    indices.resize(want, 0);

    std::vector<int> rows(h);
    if (flags & 0x40) {
      int r = 0;
      for (int pass = 0; pass < 4; ++pass) {
        static constexpr int kStart[] = {0, 4, 2, 1}, kStep[] = {8, 8, 4, 2};
        for (int y = kStart[pass]; y < h; y += kStep[pass]) rows[r++] = y;
      }
    } else {
      for (int y = 0; y < h; ++y) rows[y] = y;
    }

    RgbaImage img{sw, sh, std::vector<std::uint8_t>(static_cast<std::size_t>(sw) * sh * 4, 0)};
    const std::size_t colors = palette.size() / 3;
    for (int r = 0; r < h; ++r) {
      const int y = top + rows[r];
      if (y < 0 || y >= sh) continue;
      for (int x = 0; x < w; ++x) {
        const int cx = left + x;
        if (cx < 0 || cx >= sw) continue;
        const std::uint8_t idx = indices[static_cast<std::size_t>(r) * w + x];
        if ((transparent && idx == *transparent) || idx >= colors) continue;
        auto* px = &img.pixels[(static_cast<std::size_t>(y) * sw + cx) * 4];
        px[0] = palette[idx * 3];
        px[1] = palette[idx * 3 + 1];
        px[2] = palette[idx * 3 + 2];
        px[3] = 255;
      }
    }
    return img;
  }
  return std::nullopt;
}

MediaAttachment prepare_image(ByteView bytes, int max_dim) {
  const auto info = probe_image(bytes);
  if (!info) throw Error(ErrorCode::UndecodableImage, "unrecognized image header");
  MediaAttachment a;
  a.media_kind = MediaKind::Image;
  a.mime = image_mime(info->format);
  a.width = info->width;
  a.height = info->height;
  if (std::max(info->width, info->height) <= max_dim) {
    a.payload_base64 = base64_encode(bytes);
    return a;
  }

  cv::Mat src;
  if (info->format == ImageFormat::Gif) {
    auto rgba = decode_gif_first_frame(bytes);
    if (!rgba) throw Error(ErrorCode::UndecodableImage, "gif decode failed");
    cv::Mat wrapped(rgba->height, rgba->width, CV_8UC4, rgba->pixels.data());
    cv::cvtColor(wrapped, src, cv::COLOR_RGBA2BGRA);
  } else {
    const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    src = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
  }
  if (src.empty()) throw Error(ErrorCode::UndecodableImage, "decoder rejected image data");
  const auto [w, h] = scaled_dimensions(src.cols, src.rows, max_dim);
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_AREA);
  // OpenCV cannot write GIF; downscaled GIF frames go out as PNG.
  const std::string ext = info->format == ImageFormat::Jpeg ? ".jpg" : ".png";
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, dst, out)) throw Error(ErrorCode::UndecodableImage, "re-encode failed");
  a.mime = info->format == ImageFormat::Jpeg ? "image/jpeg" : "image/png";
  a.payload_base64 = base64_encode(out);
  a.width = w;
  a.height = h;
  a.downscaled = true;
  return a;
}

MediaAttachment prepare_image(const fs::path& path, int max_dim) {
  const auto bytes = read_file(path);
  auto a = prepare_image(bytes, max_dim);
  a.file_ref = path.string();
  return a;
}

// ---- video -----------------------------------------------------------------

namespace {

std::uint32_t be32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

std::uint64_t be64(const std::uint8_t* p) { return (static_cast<std::uint64_t>(be32(p)) << 32) | be32(p + 4); }

std::optional<double> duration_from_moov(const std::vector<std::uint8_t>& moov) {
  std::size_t pos = 0;
  while (pos + 8 <= moov.size()) {
    std::uint64_t size = be32(&moov[pos]);
    const std::string_view type(reinterpret_cast<const char*>(&moov[pos + 4]), 4);
    std::size_t header = 8;
    if (size == 1) {
      if (pos + 16 > moov.size()) return std::nullopt;
      size = be64(&moov[pos + 8]);
      header = 16;
    } else if (size == 0) {
      size = moov.size() - pos;
    }
    if (size < header || size > moov.size() - pos) return std::nullopt;
    if (type == "mvhd") {
      const std::uint8_t* p = &moov[pos + header];
      const std::size_t body = size - header;
      if (body < 1) return std::nullopt;
      if (p[0] == 1) {
        if (body < 32) return std::nullopt;
        const std::uint32_t scale = be32(p + 20);
        const std::uint64_t dur = be64(p + 24);
        if (scale == 0) return std::nullopt;
        return static_cast<double>(dur) / scale;
      }
      if (body < 20) return std::nullopt;
      const std::uint32_t scale = be32(p + 12);
      const std::uint32_t dur = be32(p + 16);
      if (scale == 0) return std::nullopt;
      return static_cast<double>(dur) / scale;
    }
    pos += static_cast<std::size_t>(size);
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> mp4_duration(std::istream& in) {
  in.seekg(0, std::ios::end);
  const std::streamoff total = in.tellg();
  if (total <= 0) return std::nullopt;
  std::streamoff pos = 0;
  while (pos + 8 <= total) {
    in.seekg(pos);
    std::uint8_t hdr[16];
    if (!in.read(reinterpret_cast<char*>(hdr), 8)) return std::nullopt;
    std::uint64_t size = be32(hdr);
    std::size_t header = 8;
    if (size == 1) {
      if (!in.read(reinterpret_cast<char*>(hdr + 8), 8)) return std::nullopt;
      size = be64(hdr + 8);
      header = 16;
    } else if (size == 0) {
      size = static_cast<std::uint64_t>(total - pos);
    }
    if (size < header || size > static_cast<std::uint64_t>(total - pos)) return std::nullopt;
    if (std::memcmp(hdr + 4, "moov", 4) == 0) {
      const std::size_t body = static_cast<std::size_t>(size - header);
      if (body > (64u << 20)) return std::nullopt;
      std::vector<std::uint8_t> moov(body);
      if (!in.read(reinterpret_cast<char*>(moov.data()), static_cast<std::streamsize>(body))) return std::nullopt;
      return duration_from_moov(moov);
    }
    pos += static_cast<std::streamoff>(size);
  }
  return std::nullopt;
}

std::vector<VideoSegment> plan_segments(double duration_s, double max_duration_s) {
  std::vector<VideoSegment> out;
  if (!(duration_s > 0) || !(max_duration_s > 0)) return out;
  const auto n = static_cast<std::size_t>(std::ceil(duration_s / max_duration_s));
  for (std::size_t k = 0; k < n; ++k) {
    const double start = static_cast<double>(k) * max_duration_s;
    out.push_back({start, std::min(static_cast<double>(k + 1) * max_duration_s, duration_s)});
  }
  return out;
}

std::vector<MediaAttachment> prepare_video(const fs::path& path, double max_duration_s) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableContainer, "cannot open " + path.string());
  const auto duration = mp4_duration(in);
  if (!duration) throw Error(ErrorCode::UnreadableContainer, "no movie header in " + path.filename().string());
  MediaAttachment base;
  base.media_kind = MediaKind::Video;
  base.mime = to_lower(path.extension().string()) == ".mov" ? "video/quicktime" : "video/mp4";
  base.file_ref = path.string();
  if (*duration <= max_duration_s) {
    base.duration_s = *duration;
    return {base};
  }
  std::vector<MediaAttachment> out;
  for (const auto& seg : plan_segments(*duration, max_duration_s)) {
    auto a = base;
    a.duration_s = seg.end_s - seg.start_s;
    a.segment_start_s = seg.start_s;
    a.segment_end_s = seg.end_s;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<MediaAttachment> sample_video_frames(const MediaAttachment& video, double interval_s, int max_frames,
                                                 int max_dim) {
  cv::VideoCapture cap(video.file_ref);
  if (!cap.isOpened()) throw Error(ErrorCode::UnreadableContainer, "no decoder for " + video.file_ref);
  const double start = video.segment_start_s.value_or(0.0);
  double end = video.segment_end_s.value_or(start + video.duration_s.value_or(0.0));
  if (end <= start) {
    const double fps = cap.get(cv::CAP_PROP_FPS);
    const double frames = cap.get(cv::CAP_PROP_FRAME_COUNT);
    end = fps > 0 ? frames / fps : start;
  }
  std::vector<MediaAttachment> out;
  for (double t = start; t < end && static_cast<int>(out.size()) < max_frames; t += interval_s) {
    cap.set(cv::CAP_PROP_POS_MSEC, t * 1000.0);
    cv::Mat frame;
    if (!cap.read(frame) || frame.empty()) break;
    const auto [w, h] = scaled_dimensions(frame.cols, frame.rows, max_dim);
    if (w != frame.cols || h != frame.rows) cv::resize(frame, frame, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    std::vector<std::uint8_t> jpg;
    if (!cv::imencode(".jpg", frame, jpg)) break;
    MediaAttachment a;
    a.media_kind = MediaKind::Image;
    a.mime = "image/jpeg";
    a.payload_base64 = base64_encode(jpg);
    a.file_ref = video.file_ref;
    a.width = w;
    a.height = h;
    a.downscaled = w != frame.cols;
    a.segment_start_s = t;
    out.push_back(std::move(a));
  }
  if (out.empty()) throw Error(ErrorCode::UnreadableContainer, "no frames decoded from " + video.file_ref);
  return out;
}

}  // namespace scout
