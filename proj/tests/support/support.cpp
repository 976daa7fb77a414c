#include "support.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include "scout/cli.hpp"

namespace scout::testing {

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "scout-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  // Restore permissions some tests remove so cleanup can descend.
  for (auto it = fs::recursive_directory_iterator(path_, fs::directory_options::skip_permission_denied, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_symlink(ec)) fs::permissions(it->path(), fs::perms::owner_all, fs::perm_options::add, ec);
  }
  fs::remove_all(path_, ec);
}

void write_bytes(const fs::path& p, std::string_view data) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CommandResult run_shell(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

namespace {
std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}
}  // namespace

CommandResult run_python(const std::string& script, const std::vector<std::string>& args) {
  TempDir dir;
  const auto file = dir / "script.py";
  write_bytes(file, script);
  std::string cmd = "python3 " + shell_quote(file.string());
  for (const auto& a : args) cmd += " " + shell_quote(a);
  return run_shell(cmd);
}

bool have_python() { return run_shell("python3 -c 'import mailbox' 2>/dev/null").status == 0; }

std::string oracle_sha256_file(const fs::path& p) {
  const auto r = run_shell("sha256sum " + shell_quote(p.string()));
  return r.out.substr(0, 64);
}

std::string oracle_sha256(std::string_view data) {
  TempDir dir;
  write_bytes(dir / "blob", data);
  return oracle_sha256_file(dir / "blob");
}

// ---- packets ---------------------------------------------------------------

std::string be16(std::uint16_t v) { return {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)}; }
std::string be32(std::uint32_t v) { return be16(static_cast<std::uint16_t>(v >> 16)) + be16(static_cast<std::uint16_t>(v)); }

std::string dns_name(std::string_view dotted) {
  std::string out;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const auto dot = dotted.find('.', start);
    const auto label = dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (label.empty()) break;
    out += static_cast<char>(label.size());
    out += label;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out + '\0';
}

std::string dns_query(std::uint16_t id, std::string_view name, std::uint16_t qtype) {
  return be16(id) + be16(0x0100) + be16(1) + be16(0) + be16(0) + be16(0) + dns_name(name) + be16(qtype) + be16(1);
}

std::string dns_response_a(std::uint16_t id, std::string_view name, const std::vector<Ip4>& addrs) {
  std::string m = be16(id) + be16(0x8180) + be16(1) + be16(static_cast<std::uint16_t>(addrs.size())) + be16(0) + be16(0);
  m += dns_name(name) + be16(1) + be16(1);
  for (const auto& a : addrs) {
    m += be16(0xC00C) + be16(1) + be16(1) + be32(300) + be16(4);
    m.append(reinterpret_cast<const char*>(a.data()), 4);
  }
  return m;
}

std::string ipv4(const Ip4& src, const Ip4& dst, std::uint8_t proto, std::string_view payload) {
  std::string h;
  h += static_cast<char>(0x45);
  h += '\0';
  h += be16(static_cast<std::uint16_t>(20 + payload.size()));
  h += be16(0x1234) + be16(0x4000);
  h += static_cast<char>(64);
  h += static_cast<char>(proto);
  h += be16(0);
  h.append(reinterpret_cast<const char*>(src.data()), 4);
  h.append(reinterpret_cast<const char*>(dst.data()), 4);
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < 20; i += 2)
    sum += (static_cast<std::uint8_t>(h[i]) << 8) | static_cast<std::uint8_t>(h[i + 1]);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  const auto ck = be16(static_cast<std::uint16_t>(~sum));
  h[10] = ck[0];
  h[11] = ck[1];
  return h + std::string(payload);
}

std::string udp(std::uint16_t sport, std::uint16_t dport, std::string_view payload) {
  return be16(sport) + be16(dport) + be16(static_cast<std::uint16_t>(8 + payload.size())) + be16(0) + std::string(payload);
}

std::string icmp(std::uint8_t type, std::uint8_t code, std::string_view payload) {
  std::string m{static_cast<char>(type), static_cast<char>(code)};
  m += be16(0) + be32(0) + std::string(payload);
  return m;
}

std::string ethernet(std::string_view payload, std::uint16_t ethertype) {
  const std::string dst("\x00\x11\x22\x33\x44\x55", 6), src("\x66\x77\x88\x99\xaa\xbb", 6);
  return dst + src + be16(ethertype) + std::string(payload);
}

PcapWriter::PcapWriter(std::uint32_t link_type, bool nanosecond, bool big_endian) : big_(big_endian) {
  bytes_ = u32(nanosecond ? 0xA1B23C4D : 0xA1B2C3D4) + u16(2) + u16(4) + u32(0) + u32(0) + u32(65535) + u32(link_type);
}

std::string PcapWriter::u32(std::uint32_t v) const {
  if (big_) return be32(v);
  return {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
}

std::string PcapWriter::u16(std::uint16_t v) const {
  if (big_) return be16(v);
  return {static_cast<char>(v), static_cast<char>(v >> 8)};
}

void PcapWriter::add(std::uint32_t ts_sec, std::uint32_t ts_frac, std::string_view frame) {
  const auto n = static_cast<std::uint32_t>(frame.size());
  bytes_ += u32(ts_sec) + u32(ts_frac) + u32(n) + u32(n) + std::string(frame);
}

void PcapWriter::add_truncated(std::uint32_t ts_sec, std::uint32_t ts_frac, std::string_view frame, std::uint32_t caplen) {
  bytes_ += u32(ts_sec) + u32(ts_frac) + u32(caplen) + u32(static_cast<std::uint32_t>(frame.size())) +
            std::string(frame.substr(0, caplen));
}

std::string fig3_pcap() {
  const Ip4 client{10, 0, 0, 23}, resolver{10, 0, 0, 1};
  PcapWriter w;
  std::uint32_t t = 1100000000;
  std::uint16_t id = 0x1000;
  for (int i = 0; i < 3; ++i) {
    ++id;
    w.add(t++, 1000, ethernet(ipv4(client, resolver, 17, udp(40000 + i, 53, dns_query(id, "land.vendors.slashdot.org")))));
    w.add(t++, 2000, ethernet(ipv4(resolver, client, 17,
                                   udp(53, 40000 + i, dns_response_a(id, "land.vendors.slashdot.org", {{216, 34, 181, 47}})))));
  }
  ++id;
  w.add(t++, 0, ethernet(ipv4(client, resolver, 17, udp(40100, 53, dns_query(id, "apache.slashdot.org")))));
  w.add(t++, 0, ethernet(ipv4(resolver, client, 17, udp(53, 40100, dns_response_a(id, "apache.slashdot.org", {{216, 34, 181, 48}})))));
  const std::string original = ipv4(client, resolver, 17, udp(40200, 53, ""));
  for (int i = 0; i < 2; ++i) w.add(t++, 0, ethernet(ipv4(resolver, client, 1, icmp(3, 3, original))));
  return w.bytes();
}

// ---- zip / docx ------------------------------------------------------------

namespace {
std::string le16(std::uint16_t v) { return {static_cast<char>(v), static_cast<char>(v >> 8)}; }
std::string le32(std::uint32_t v) { return le16(static_cast<std::uint16_t>(v)) + le16(static_cast<std::uint16_t>(v >> 16)); }

std::string raw_deflate(std::string_view in) {
  z_stream zs{};
  deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY);
  std::string out(deflateBound(&zs, in.size()) + 16, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}
}  // namespace

std::string make_zip(const std::vector<ZipEntry>& entries) {
  std::string body, central;
  for (const auto& e : entries) {
    const auto crc = static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(e.data.data()), static_cast<uInt>(e.data.size())));
    const std::string payload = e.deflate ? raw_deflate(e.data) : e.data;
    const std::uint16_t method = e.deflate ? 8 : 0;
    const auto offset = static_cast<std::uint32_t>(body.size());
    body += le32(0x04034b50) + le16(20) + le16(0) + le16(method) + le16(0) + le16(0x21) + le32(crc) +
            le32(static_cast<std::uint32_t>(payload.size())) + le32(static_cast<std::uint32_t>(e.data.size())) +
            le16(static_cast<std::uint16_t>(e.name.size())) + le16(0) + e.name + payload;
    central += le32(0x02014b50) + le16(20) + le16(20) + le16(0) + le16(method) + le16(0) + le16(0x21) + le32(crc) +
               le32(static_cast<std::uint32_t>(payload.size())) + le32(static_cast<std::uint32_t>(e.data.size())) +
               le16(static_cast<std::uint16_t>(e.name.size())) + le16(0) + le16(0) + le16(0) + le16(0) + le32(0) +
               le32(offset) + e.name;
  }
  const auto cd_offset = static_cast<std::uint32_t>(body.size());
  return body + central + le32(0x06054b50) + le16(0) + le16(0) + le16(static_cast<std::uint16_t>(entries.size())) +
         le16(static_cast<std::uint16_t>(entries.size())) + le32(static_cast<std::uint32_t>(central.size())) +
         le32(cd_offset) + le16(0);
}

std::string make_docx(const DocxSpec& spec) {
  const std::string types =
      R"(<?xml version="1.0" encoding="UTF-8" standalone="yes"?>)"
      R"(<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">)"
      R"(<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>)"
      R"(<Default Extension="xml" ContentType="application/xml"/>)"
      R"(<Override PartName="/word/document.xml" ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml"/>)"
      R"(<Override PartName="/docProps/core.xml" ContentType="application/vnd.openxmlformats-package.core-properties+xml"/>)"
      R"(</Types>)";
  const std::string rels =
      R"(<?xml version="1.0" encoding="UTF-8" standalone="yes"?>)"
      R"(<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">)"
      R"(<Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" Target="word/document.xml"/>)"
      R"(<Relationship Id="rId2" Type="http://schemas.openxmlformats.org/package/2006/relationships/metadata/core-properties" Target="docProps/core.xml"/>)"
      R"(</Relationships>)";
  std::string doc =
      R"(<?xml version="1.0" encoding="UTF-8" standalone="yes"?>)"
      R"(<w:document xmlns:w="http://schemas.openxmlformats.org/wordprocessingml/2006/main"><w:body>)";
  for (const auto& p : spec.paragraphs) doc += "<w:p><w:r><w:t xml:space=\"preserve\">" + xml_escape(p) + "</w:t></w:r></w:p>";
  doc += "</w:body></w:document>";
  std::string core =
      R"(<?xml version="1.0" encoding="UTF-8" standalone="yes"?>)"
      R"(<cp:coreProperties xmlns:cp="http://schemas.openxmlformats.org/package/2006/metadata/core-properties" )"
      R"(xmlns:dc="http://purl.org/dc/elements/1.1/" xmlns:dcterms="http://purl.org/dc/terms/" )"
      R"(xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance">)";
  if (spec.title) core += "<dc:title>" + xml_escape(*spec.title) + "</dc:title>";
  if (spec.creator) core += "<dc:creator>" + xml_escape(*spec.creator) + "</dc:creator>";
  if (spec.last_modified_by) core += "<cp:lastModifiedBy>" + xml_escape(*spec.last_modified_by) + "</cp:lastModifiedBy>";
  if (spec.created) core += "<dcterms:created xsi:type=\"dcterms:W3CDTF\">" + *spec.created + "</dcterms:created>";
  if (spec.modified) core += "<dcterms:modified xsi:type=\"dcterms:W3CDTF\">" + *spec.modified + "</dcterms:modified>";
  core += "</cp:coreProperties>";
  return make_zip({{"[Content_Types].xml", types}, {"_rels/.rels", rels}, {"word/document.xml", doc}, {"docProps/core.xml", core}});
}

DocxSpec fig6_docx_spec() {
  DocxSpec s;
  s.paragraphs = {"Quarterly transfer schedule", "Wire the remaining balance before the audit."};
  s.created = "2024-12-26T07:10:00";
  s.modified = "2024-12-24T09:17:00";
  s.last_modified_by = "Admin";
  s.creator = "j.doe";
  s.title = "Transfers";
  return s;
}

// ---- media -----------------------------------------------------------------

std::string encode_image(int width, int height, const std::string& ext) {
  cv::Mat m(height, width, CV_8UC3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(x * 255 / std::max(1, width - 1)),
                                        static_cast<uchar>(y * 255 / std::max(1, height - 1)), 128);
  std::vector<uchar> out;
  cv::imencode(ext, m, out);
  return {out.begin(), out.end()};
}

void write_test_video(const fs::path& p, double seconds, int fps, int width, int height) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  cv::VideoWriter w(p.string(), cv::VideoWriter::fourcc('m', 'p', '4', 'v'), fps, cv::Size(width, height));
  if (!w.isOpened()) throw std::runtime_error("cannot write video " + p.string());
  const int frames = static_cast<int>(seconds * fps);
  for (int i = 0; i < frames; ++i) w.write(cv::Mat(height, width, CV_8UC3, cv::Scalar(i % 255, 64, 200 - i % 200)));
  w.release();
}

// ---- corpora ---------------------------------------------------------------

std::string random_text(std::mt19937& rng, std::size_t approx_len) {
  static const std::vector<std::string> pieces{"a", "b", "c", "x", "y", " ", " ", "\n", "é", "ü", "漢", "🙂", "{", "}", "\"", "\t", "0", "9"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string s;
  while (s.size() < approx_len) s += pieces[pick(rng)];
  return s;
}

namespace {
std::string wav_bytes(std::size_t samples) {
  std::string data(samples * 2, '\0');
  for (std::size_t i = 0; i < samples; ++i) data[i * 2] = static_cast<char>(i * 7);
  return "RIFF" + le32(static_cast<std::uint32_t>(36 + data.size())) + "WAVE" + "fmt " + le32(16) + le16(1) + le16(1) +
         le32(8000) + le32(16000) + le16(2) + le16(16) + "data" + le32(static_cast<std::uint32_t>(data.size())) + data;
}
}  // namespace

std::vector<CorpusFile> build_mixed_corpus(const fs::path& root, std::size_t count, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<CorpusFile> files;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string dir = "d" + std::to_string(i % 7) + "/";
    const std::string stem = dir + "f" + std::to_string(i);
    std::string rel, kind, data;
    switch (i % 12) {
      case 0:
        rel = stem + ".txt", kind = "PlainText", data = "note " + std::to_string(i) + "\n" + random_text(rng, 200 + rng() % 800);
        break;
      case 1:
        rel = stem + ".html", kind = "Html";
        data = "<html><body><h1>Page " + std::to_string(i) + "</h1><p>a &amp; b " + std::to_string(rng()) + "</p></body></html>";
        break;
      case 2:
        rel = stem + ".eml", kind = "Eml";
        data = "From: a" + std::to_string(i) + "@example.org\r\nTo: b@example.org\r\nSubject: msg " + std::to_string(i) +
               "\r\nMessage-ID: <" + std::to_string(i) + "@example.org>\r\n\r\nbody " + std::to_string(rng()) + "\r\n";
        break;
      case 3:
        rel = stem + ".mbox", kind = "Mbox";
        for (int m = 0; m < 3; ++m)
          data += "From sender@example.org Mon Jan  1 00:00:00 2024\nFrom: s@example.org\nSubject: s" + std::to_string(i) +
                  "-" + std::to_string(m) + "\nMessage-ID: <" + std::to_string(i) + "." + std::to_string(m) +
                  "@x>\n\nline " + std::to_string(rng()) + "\n>From quoted\n\n";
        break;
      case 4: {
        rel = stem + ".pcap", kind = "Pcap";
        PcapWriter w;
        for (int p = 0; p < 5; ++p)
          w.add(1700000000 + p, static_cast<std::uint32_t>(rng() % 1000000),
                ethernet(ipv4({10, 0, 0, 2}, {10, 0, 0, 1}, 17, udp(5000, 53, dns_query(static_cast<std::uint16_t>(rng()), "host" + std::to_string(i) + ".example.org")))));
        data = w.bytes();
        break;
      }
      case 5: {
        rel = stem + ".docx", kind = "Docx";
        DocxSpec s;
        s.paragraphs = {"Document " + std::to_string(i), "value " + std::to_string(rng())};
        s.created = "2023-01-02T03:04:05Z";
        s.modified = (i % 24 == 5) ? "2022-01-01T00:00:00Z" : "2023-05-06T07:08:09Z";
        s.last_modified_by = (i % 36 == 5) ? "Administrator" : "alice";
        data = make_docx(s);
        if (i % 60 == 5) data = data.substr(0, 40);  // damaged archive
        break;
      }
      case 6:
        rel = stem + ".png", kind = "Image", data = encode_image(20 + static_cast<int>(rng() % 60), 20 + static_cast<int>(rng() % 60), ".png");
        break;
      case 7:
        rel = stem + ".jpg", kind = "Image", data = encode_image(1100 + static_cast<int>(rng() % 200), 300, ".jpg");
        break;
      case 8:
        rel = stem + ".wav", kind = "Audio", data = (i % 24 == 8) ? std::string() : wav_bytes(400 + rng() % 400);
        if (data.empty()) kind = "Unknown";
        break;
      case 9:
        if (i % 48 == 9) {
          rel = stem + ".mp4", kind = "Video";
          write_test_video(root / rel, 2.0);
          files.push_back({rel, kind});
          continue;
        }
        rel = stem + ".log", kind = "PlainText", data = "log line " + std::to_string(rng()) + "\n";
        break;
      case 10:
        rel = stem + ".bin", kind = "Unknown";
        data.resize(64 + rng() % 256);
        for (auto& c : data) c = static_cast<char>(rng() % 32);
        data[0] = '\0';  // NUL keeps it out of the text kinds
        break;
      default:
        rel = stem + ".csv", kind = "PlainText", data = "a,b,c\n1,2," + std::to_string(rng()) + "\n";
        break;
    }
    write_bytes(root / rel, data);
    files.push_back({rel, kind});
  }
  return files;
}

// ---- pipeline --------------------------------------------------------------

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::vector<std::string> full{"scout"};
  full.insert(full.end(), args.begin(), args.end());
  CliResult r;
  r.code = run_command(full, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string mock_config_json(const std::string& chat_url, const std::string& asr_url, int workers) {
  nlohmann::ordered_json j;
  j["profiles"]["text"] = {{"endpoint_url", chat_url}, {"model_id", "mock-text"}, {"modality", "text"}, {"max_retries", 1}};
  j["profiles"]["vision"] = {{"endpoint_url", chat_url}, {"model_id", "mock-vision"}, {"modality", "vision"}, {"max_retries", 1}};
  j["gateway"] = {{"max_concurrent", 2}, {"backoff_base_ms", 5}};
  j["asr"] = {{"url", asr_url}, {"model", "mock-asr"}};
  j["analyze"] = {{"workers", workers}};
  return j.dump(2);
}

std::string case_json(const std::string& id, const std::vector<std::string>& keywords) {
  nlohmann::ordered_json j;
  j["case"] = {{"id", id}, {"background", "Suspected fraud involving altered documents."}, {"keywords", keywords}};
  return j.dump(2);
}

}  // namespace scout::testing
