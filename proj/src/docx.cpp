#include "scout/docx.hpp"

#include <zlib.h>

#include <cstring>

namespace scout {

namespace {

std::uint16_t le16(ByteView b, std::size_t off) { return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8)); }
std::uint32_t le32(ByteView b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) | (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::size_t kMaxInflated = 256u << 20;

}  // namespace

ZipArchive::ZipArchive(ByteView bytes) : bytes_(bytes) {
  if (bytes.size() < 4 || le32(bytes, 0) != kLocalSig) throw Error(ErrorCode::NotZip, "missing local file signature");
  if (bytes.size() < 22) throw Error(ErrorCode::CorruptArchive, "too short for an end-of-directory record");
  std::optional<std::size_t> eocd;
  const std::size_t lowest = bytes.size() > 22 + 0xFFFF ? bytes.size() - 22 - 0xFFFF : 0;
  for (std::size_t pos = bytes.size() - 22 + 1; pos-- > lowest;) {
    if (le32(bytes, pos) == kEndSig) {
      eocd = pos;
      break;
    }
  }
  if (!eocd) throw Error(ErrorCode::CorruptArchive, "end-of-central-directory record not found");
  const std::size_t count = le16(bytes, *eocd + 10);
  const std::size_t cd_size = le32(bytes, *eocd + 12);
  const std::size_t cd_offset = le32(bytes, *eocd + 16);
  if (cd_offset > bytes.size() || cd_size > bytes.size() - cd_offset)
    throw Error(ErrorCode::CorruptArchive, "central directory out of range");
  std::size_t pos = cd_offset;
  for (std::size_t i = 0; i < count; ++i) {
    if (pos + 46 > cd_offset + cd_size || le32(bytes, pos) != kCentralSig)
      throw Error(ErrorCode::CorruptArchive, "bad central directory entry " + std::to_string(i));
    Entry e;
    e.method = le16(bytes, pos + 10);
    e.compressed_size = le32(bytes, pos + 20);
    e.uncompressed_size = le32(bytes, pos + 24);
    const std::size_t name_len = le16(bytes, pos + 28);
    const std::size_t extra_len = le16(bytes, pos + 30);
    const std::size_t comment_len = le16(bytes, pos + 32);
    e.local_header_offset = le32(bytes, pos + 42);
    if (pos + 46 + name_len > bytes.size()) throw Error(ErrorCode::CorruptArchive, "entry name out of range");
    e.name.assign(reinterpret_cast<const char*>(bytes.data() + pos + 46), name_len);
    entries_.push_back(std::move(e));
    pos += 46 + name_len + extra_len + comment_len;
  }
}

const ZipArchive::Entry* ZipArchive::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::string ZipArchive::read(const Entry& e) const {
  const std::size_t off = e.local_header_offset;
  if (off + 30 > bytes_.size() || le32(bytes_, off) != kLocalSig)
    throw Error(ErrorCode::CorruptArchive, "bad local header for " + e.name);
  const std::size_t data = off + 30 + le16(bytes_, off + 26) + le16(bytes_, off + 28);
  if (data > bytes_.size() || e.compressed_size > bytes_.size() - data)
    throw Error(ErrorCode::CorruptArchive, "member data out of range: " + e.name);
  const auto payload = bytes_.subspan(data, e.compressed_size);
  if (e.method == 0) return std::string(as_text(payload));
  if (e.method != 8) throw Error(ErrorCode::CorruptArchive, "unsupported compression method " + std::to_string(e.method));

  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error(ErrorCode::CorruptArchive, "inflate init failed");
  std::string out;
  out.reserve(std::min<std::size_t>(e.uncompressed_size, kMaxInflated));
  zs.next_in = const_cast<Bytef*>(payload.data());
  zs.avail_in = static_cast<uInt>(payload.size());
  char buf[1 << 14];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) break;
    out.append(buf, sizeof buf - zs.avail_out);
    if (out.size() > kMaxInflated) break;
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) break;
  }
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::CorruptArchive, "inflate failed for " + e.name);
  return out;
}

std::optional<std::string> ZipArchive::read(std::string_view name) const {
  const auto* e = find(name);
  if (!e) return std::nullopt;
  return read(*e);
}

// ---- XML scanning ----------------------------------------------------------

std::string xml_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else if (ent.size() > 1 && ent[0] == '#') {
      char32_t cp = 0;
      const bool hex = ent[1] == 'x' || ent[1] == 'X';
      bool ok = ent.size() > (hex ? 2u : 1u);
      for (char c : ent.substr(hex ? 2 : 1)) {
        int v = -1;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
        if (v < 0) ok = false;
        else cp = std::min<char32_t>(cp * (hex ? 16 : 10) + static_cast<char32_t>(v), 0x110000);
      }
      if (!ok) {
        out.push_back('&');
        continue;
      }
      append_utf8(out, cp);
    } else {
      out.push_back('&');
      continue;
    }
    i = semi;
  }
  return out;
}

namespace {

struct Tag {
  std::string_view local;  // name without namespace prefix
  bool closing = false;
  bool self_closing = false;
  std::string_view attrs;
  std::size_t end = 0;  // index past '>'
};

std::optional<Tag> next_tag(std::string_view xml, std::size_t& pos) {
  while (true) {
    const auto lt = xml.find('<', pos);
    if (lt == std::string_view::npos) return std::nullopt;
    const auto gt = xml.find('>', lt);
    if (gt == std::string_view::npos) return std::nullopt;
    pos = gt + 1;
    std::string_view inner = xml.substr(lt + 1, gt - lt - 1);
    if (inner.empty() || inner[0] == '?' || inner[0] == '!') continue;
    Tag t;
    t.end = gt + 1;
    if (inner[0] == '/') {
      t.closing = true;
      inner.remove_prefix(1);
    }
    if (!inner.empty() && inner.back() == '/') {
      t.self_closing = true;
      inner.remove_suffix(1);
    }
    const auto name_end = inner.find_first_of(" \t\r\n");
    const auto qname = inner.substr(0, name_end);
    const auto colon = qname.find(':');
    t.local = colon == std::string_view::npos ? qname : qname.substr(colon + 1);
    t.attrs = name_end == std::string_view::npos ? std::string_view{} : inner.substr(name_end);
    return t;
  }
}

std::string document_text(std::string_view xml) {
  std::string text;
  std::size_t pos = 0;
  while (auto tag = next_tag(xml, pos)) {
    if (tag->closing) {
      if (tag->local == "p") text.push_back('\n');
      continue;
    }
    if (tag->local == "t" && !tag->self_closing) {
      const auto close = xml.find("</", tag->end);
      if (close == std::string_view::npos) break;
      text += xml_unescape(xml.substr(tag->end, close - tag->end));
      pos = close;
    } else if (tag->local == "tab") {
      text.push_back('\t');
    } else if (tag->local == "br" || tag->local == "cr") {
      text.push_back('\n');
    } else if (tag->local == "p" && tag->self_closing) {
      text.push_back('\n');
    }
  }
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return sanitize_utf8(text);
}

std::optional<std::string> element_text(std::string_view xml, std::string_view local) {
  std::size_t pos = 0;
  while (auto tag = next_tag(xml, pos)) {
    if (tag->closing || tag->local != local) continue;
    if (tag->self_closing) return std::string();
    const auto close = xml.find("</", tag->end);
    if (close == std::string_view::npos) return std::nullopt;
    return sanitize_utf8(trim(xml_unescape(xml.substr(tag->end, close - tag->end))));
  }
  return std::nullopt;
}

std::optional<std::string> non_empty(std::optional<std::string> v) {
  if (v && v->empty()) return std::nullopt;
  return v;
}

// Resolves a package relationship target by type suffix from _rels/.rels.
std::optional<std::string> relationship_target(const ZipArchive& zip, std::string_view type_suffix) {
  const auto rels = zip.read("_rels/.rels");
  if (!rels) return std::nullopt;
  std::string_view xml = *rels;
  std::size_t pos = 0;
  while (auto tag = next_tag(xml, pos)) {
    if (tag->closing || tag->local != "Relationship") continue;
    auto attr = [&](std::string_view name) -> std::string {
      const std::string key = std::string(name) + "=\"";
      const auto at = tag->attrs.find(key);
      if (at == std::string_view::npos) return {};
      const auto start = at + key.size();
      const auto end = tag->attrs.find('"', start);
      return std::string(tag->attrs.substr(start, end - start));
    };
    if (attr("Type").ends_with(type_suffix)) {
      std::string target = attr("Target");
      while (!target.empty() && target.front() == '/') target.erase(0, 1);
      if (!target.empty()) return target;
    }
  }
  return std::nullopt;
}

}  // namespace

DocContent extract_docx(ByteView bytes) {
  const ZipArchive zip(bytes);
  DocContent doc;
  doc.format_note = "docx (built-in OOXML extractor)";

  const std::string main_part =
      relationship_target(zip, "/officeDocument").value_or("word/document.xml");
  const auto xml = zip.read(main_part);
  if (!xml) throw Error(ErrorCode::CorruptArchive, "no main document part " + main_part);
  doc.text = document_text(*xml);

  const std::string core_part =
      relationship_target(zip, "/core-properties").value_or("docProps/core.xml");
  if (const auto core = zip.read(core_part)) {
    auto ts = [&](std::string_view local) -> std::optional<UtcTime> {
      const auto v = element_text(*core, local);
      return v ? parse_iso(*v) : std::nullopt;
    };
    doc.metadata.created = ts("created");
    doc.metadata.modified = ts("modified");
    doc.metadata.last_modified_by = non_empty(element_text(*core, "lastModifiedBy"));
    doc.metadata.author = non_empty(element_text(*core, "creator"));
    doc.metadata.title = non_empty(element_text(*core, "title"));
  }
  return doc;
}

std::string render_document(const DocContent& doc) {
  auto opt = [](const std::optional<std::string>& v) { return v ? *v : std::string("(absent)"); };
  auto ts = [](const std::optional<UtcTime>& v) { return v ? format_iso(*v) : std::string("(absent)"); };
  std::string s = "Document metadata:\n";
  s += "  Created: " + ts(doc.metadata.created) + "\n";
  s += "  Modified: " + ts(doc.metadata.modified) + "\n";
  s += "  Last modified by: " + opt(doc.metadata.last_modified_by) + "\n";
  s += "  Author: " + opt(doc.metadata.author) + "\n";
  s += "  Title: " + opt(doc.metadata.title) + "\n";
  s += "\nDocument content:\n" + doc.text;
  if (!s.ends_with('\n')) s += "\n";
  return s;
}

}  // namespace scout
