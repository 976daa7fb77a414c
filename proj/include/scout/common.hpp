#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scout {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Actor string written into every custody record.
std::string actor_id();

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline std::string_view as_text(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

enum class ErrorCode {
  RootNotFound,
  PermissionDenied,
  LedgerCorrupt,
  IoFailure,
  BadMagic,
  UnsupportedVersion,
  TruncatedGlobalHeader,
  NotMbox,
  NotZip,
  CorruptArchive,
  EndpointUnreachable,
  AsrRejected,
  EmptyTranscript,
  UndecodableImage,
  UnreadableContainer,
  BudgetTooSmall,
  ModelError,
  Timeout,
  InvalidConfig,
  Usage,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every recoverable failure the pipeline reports.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---- time ------------------------------------------------------------------

using UtcTime = std::chrono::sys_seconds;
using Clock = std::function<UtcTime()>;

UtcTime utc_now();
Clock system_clock_source();

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso(UtcTime t);

/// Accepts W3CDTF/ISO-8601 date-times: "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS[.frac]]"
/// with optional "Z" or "+HH:MM"/"-HH:MM". No zone designator reads as UTC.
std::optional<UtcTime> parse_iso(std::string_view text);

// ---- hashing / encoding ----------------------------------------------------

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(ByteView data);
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(ByteView data);
inline std::string sha256_hex(std::string_view s) { return sha256_hex(as_bytes(s)); }

/// Streams a file through SHA-256 without loading it whole. Throws Error(IoFailure).
std::string sha256_file(const std::filesystem::path& path);

std::string to_hex(ByteView data);
bool is_sha256_hex(std::string_view s);

std::string base64_encode(ByteView data);
/// Lenient MIME decode: ignores whitespace and stray characters, stops at padding.
Bytes base64_decode(std::string_view text);

// ---- text helpers ----------------------------------------------------------

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool icontains(std::string_view haystack, std::string_view needle);

/// Replaces every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view s);
bool is_valid_utf8(std::string_view s, bool allow_truncated_tail = false);
void append_utf8(std::string& out, char32_t cp);

/// Reads a whole file read-only. Throws Error(IoFailure).
Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace scout
