#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scout::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view rel) const { return path_ / fs::path(rel); }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, std::string_view data);
std::string read_bytes(const fs::path& p);

struct CommandResult {
  int status = -1;
  std::string out;
};

/// /bin/sh -c, capturing stdout.
CommandResult run_shell(const std::string& cmd);
/// Runs a python3 script body with arguments.
CommandResult run_python(const std::string& script, const std::vector<std::string>& args = {});
bool have_python();

/// sha256sum(1) of a file.
std::string oracle_sha256_file(const fs::path& p);
/// sha256sum(1) of a byte string.
std::string oracle_sha256(std::string_view data);

// ---- packet construction (independent of the decoder) ----------------------

using Ip4 = std::array<std::uint8_t, 4>;

std::string be16(std::uint16_t v);
std::string be32(std::uint32_t v);

/// Wire-form DNS name without compression.
std::string dns_name(std::string_view dotted);
std::string dns_query(std::uint16_t id, std::string_view name, std::uint16_t qtype = 1);
/// Answer section names point back to the question (0xC00C).
std::string dns_response_a(std::uint16_t id, std::string_view name, const std::vector<Ip4>& addrs);

std::string ipv4(const Ip4& src, const Ip4& dst, std::uint8_t proto, std::string_view payload);
std::string udp(std::uint16_t sport, std::uint16_t dport, std::string_view payload);
std::string icmp(std::uint8_t type, std::uint8_t code, std::string_view payload);
std::string ethernet(std::string_view payload, std::uint16_t ethertype = 0x0800);

class PcapWriter {
 public:
  explicit PcapWriter(std::uint32_t link_type = 1, bool nanosecond = false, bool big_endian = false);
  void add(std::uint32_t ts_sec, std::uint32_t ts_frac, std::string_view frame);
  /// Record whose captured length is cut to `caplen`.
  void add_truncated(std::uint32_t ts_sec, std::uint32_t ts_frac, std::string_view frame, std::uint32_t caplen);
  const std::string& bytes() const { return bytes_; }

 private:
  std::string u32(std::uint32_t v) const;
  std::string u16(std::uint16_t v) const;
  bool big_ = false;
  std::string bytes_;
};

/// DNS lookups for land.vendors.slashdot.org and apache.slashdot.org plus
/// ICMP destination-unreachable packets.
std::string fig3_pcap();

// ---- documents -------------------------------------------------------------

struct ZipEntry {
  std::string name;
  std::string data;
  bool deflate = true;
};
std::string make_zip(const std::vector<ZipEntry>& entries);

struct DocxSpec {
  std::vector<std::string> paragraphs;
  std::optional<std::string> created;
  std::optional<std::string> modified;
  std::optional<std::string> last_modified_by;
  std::optional<std::string> creator;
  std::optional<std::string> title;
};
std::string make_docx(const DocxSpec& spec);

/// Created 2024-12-26T07:10:00, modified 2024-12-24T09:17:00, last modified by Admin.
DocxSpec fig6_docx_spec();

// ---- media -----------------------------------------------------------------

/// ".png", ".jpg" via OpenCV; a gradient so downscaling has real content.
std::string encode_image(int width, int height, const std::string& ext);
void write_test_video(const fs::path& p, double seconds, int fps = 10, int width = 64, int height = 48);

// ---- corpora ---------------------------------------------------------------

struct CorpusFile {
  std::string path;
  std::string kind;
};

/// Mixed evidence tree: text, html, eml, mbox, pcap, docx, images, audio,
/// video and unknown binaries, deterministic for a seed.
std::vector<CorpusFile> build_mixed_corpus(const fs::path& root, std::size_t count, std::uint32_t seed);

/// Random printable-plus-UTF-8 text of `len` bytes or so.
std::string random_text(std::mt19937& rng, std::size_t approx_len);

// ---- pipeline --------------------------------------------------------------

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};
CliResult cli(const std::vector<std::string>& args);

/// Config pointing both text and vision profiles at `chat_url` with fast backoff.
std::string mock_config_json(const std::string& chat_url, const std::string& asr_url, int workers = 4);
std::string case_json(const std::string& id, const std::vector<std::string>& keywords = {});

}  // namespace scout::testing
