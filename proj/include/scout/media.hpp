#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "scout/common.hpp"

namespace scout {

enum class MediaKind { Image, Video };

/// Media payload headed for a vision profile. Images carry a base64
/// payload; videos carry a file reference and are encoded at request time.
struct MediaAttachment {
  MediaKind media_kind = MediaKind::Image;
  std::string mime;
  std::string payload_base64;
  std::string file_ref;
  std::optional<int> width;
  std::optional<int> height;
  std::optional<double> duration_s;
  bool downscaled = false;
  /// Video segment bounds, seconds from the start of the container.
  std::optional<double> segment_start_s;
  std::optional<double> segment_end_s;

  bool operator==(const MediaAttachment&) const = default;
};

struct TranscriptSegment {
  double start_s = 0;
  double end_s = 0;
  std::string text;
  bool operator==(const TranscriptSegment&) const = default;
};

struct Transcript {
  std::string text;
  std::optional<std::string> language;
  std::vector<TranscriptSegment> segments;  // ordered, non-overlapping
  std::string asr_model;
};

struct AsrEndpoint {
  std::string url;  // e.g. http://127.0.0.1:8000/v1/audio/transcriptions
  std::string model = "whisper-1";
  int timeout_s = 600;
};

/// Throws Error(EndpointUnreachable | AsrRejected | EmptyTranscript).
Transcript transcribe_audio(const std::filesystem::path& path, const AsrEndpoint& endpoint);

/// Parses a transcription response body; segments are sorted and clipped so they never overlap.
Transcript parse_transcription(std::string_view json_body, std::string_view asr_model);

// ---- images ----------------------------------------------------------------

enum class ImageFormat { Jpeg, Png, Gif };

struct ImageInfo {
  ImageFormat format = ImageFormat::Png;
  int width = 0;
  int height = 0;
};

std::optional<ImageInfo> probe_image(ByteView bytes);
std::string image_mime(ImageFormat f);

/// Longest side scaled to `max_dim`, aspect preserved by rounding the short side.
std::pair<int, int> scaled_dimensions(int width, int height, int max_dim);

/// Throws Error(UndecodableImage).
MediaAttachment prepare_image(ByteView bytes, int max_dim);
MediaAttachment prepare_image(const std::filesystem::path& path, int max_dim);

/// First frame of a GIF as packed RGBA rows. nullopt if undecodable.
struct RgbaImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};
std::optional<RgbaImage> decode_gif_first_frame(ByteView bytes);

// ---- video -----------------------------------------------------------------

/// Reads the movie header of an MPEG-4/QuickTime container.
std::optional<double> mp4_duration(std::istream& in);

struct VideoSegment {
  double start_s = 0;
  double end_s = 0;
  bool operator==(const VideoSegment&) const = default;
};

/// Sequential [start, end) windows of at most `max_duration_s` covering [0, duration).
std::vector<VideoSegment> plan_segments(double duration_s, double max_duration_s);

/// One attachment when the video fits the cap, else one per segment.
/// Throws Error(UnreadableContainer).
std::vector<MediaAttachment> prepare_video(const std::filesystem::path& path, double max_duration_s);

/// Samples one frame every `interval_s` within the attachment's segment,
/// at most `max_frames`, each downscaled to `max_dim` and JPEG-encoded.
std::vector<MediaAttachment> sample_video_frames(const MediaAttachment& video, double interval_s, int max_frames,
                                                 int max_dim);

}  // namespace scout
