#include "scout/evidence.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

namespace scout {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<EvidenceKind, std::string_view>, 10> kKindNames{{
    {EvidenceKind::Pcap, "Pcap"},
    {EvidenceKind::Mbox, "Mbox"},
    {EvidenceKind::Eml, "Eml"},
    {EvidenceKind::Docx, "Docx"},
    {EvidenceKind::Html, "Html"},
    {EvidenceKind::PlainText, "PlainText"},
    {EvidenceKind::Audio, "Audio"},
    {EvidenceKind::Image, "Image"},
    {EvidenceKind::Video, "Video"},
    {EvidenceKind::Unknown, "Unknown"},
}};

}  // namespace

std::string_view to_string(EvidenceKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "Unknown";
}

std::optional<EvidenceKind> parse_evidence_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (iequals(name, s)) return kind;
  return std::nullopt;
}

std::string_view to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::Readable: return "readable";
    case ItemStatus::Unreadable: return "unreadable";
    case ItemStatus::Symlink: return "symlink";
  }
  return "readable";
}

std::optional<ItemStatus> parse_item_status(std::string_view s) {
  for (auto v : {ItemStatus::Readable, ItemStatus::Unreadable, ItemStatus::Symlink})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

const EvidenceItem* Manifest::find_by_id(std::string_view id) const {
  for (const auto& it : items)
    if (it.id == id) return &it;
  return nullptr;
}

// ---- kind detection --------------------------------------------------------

namespace {

bool has_prefix(ByteView b, std::string_view magic, std::size_t offset = 0) {
  return b.size() >= offset + magic.size() && std::memcmp(b.data() + offset, magic.data(), magic.size()) == 0;
}

std::string extension_of(std::string_view filename) {
  return to_lower(fs::path(std::string(filename)).extension().string());
}

}  // namespace

EvidenceKind detect_kind(ByteView prefix, std::string_view filename) {
  if (prefix.empty()) return EvidenceKind::Unknown;
  using namespace std::string_view_literals;
  const std::string ext = extension_of(filename);

  if (has_prefix(prefix, "\xA1\xB2\xC3\xD4"sv) || has_prefix(prefix, "\xD4\xC3\xB2\xA1"sv) ||
      has_prefix(prefix, "\xA1\xB2\x3C\x4D"sv) || has_prefix(prefix, "\x4D\x3C\xB2\xA1"sv))
    return EvidenceKind::Pcap;
  if (has_prefix(prefix, "PK\x03\x04"sv)) return ext == ".docx" ? EvidenceKind::Docx : EvidenceKind::Unknown;
  if (has_prefix(prefix, "From "sv)) return EvidenceKind::Mbox;
  if (has_prefix(prefix, "RIFF"sv) || has_prefix(prefix, "ID3"sv) || has_prefix(prefix, "fLaC"sv) ||
      has_prefix(prefix, "OggS"sv))
    return EvidenceKind::Audio;
  if (has_prefix(prefix, "\xFF\xD8\xFF"sv) || has_prefix(prefix, "\x89PNG\r\n\x1A\n"sv) ||
      has_prefix(prefix, "GIF87a"sv) || has_prefix(prefix, "GIF89a"sv))
    return EvidenceKind::Image;
  if (has_prefix(prefix, "ftyp"sv, 4)) {
    // Audio-only MPEG-4 brands share the box layout.
    if (has_prefix(prefix, "M4A "sv, 8) || has_prefix(prefix, "M4B "sv, 8)) return EvidenceKind::Audio;
    return EvidenceKind::Video;
  }

  const std::string_view text = as_text(prefix);
  std::size_t i = has_prefix(prefix, "\xEF\xBB\xBF"sv) ? 3 : 0;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r' || text[i] == '\n')) ++i;
  const auto rest = text.substr(i);
  if (istarts_with(rest, "<!doctype html") || istarts_with(rest, "<html")) return EvidenceKind::Html;

  const bool truncated = prefix.size() >= kSniffBytes;
  if (text.find('\0') == std::string_view::npos && is_valid_utf8(text, truncated)) {
    if (ext == ".eml") return EvidenceKind::Eml;
    if (ext == ".html" || ext == ".htm") return EvidenceKind::Html;
    return EvidenceKind::PlainText;
  }
  return EvidenceKind::Unknown;
}

// ---- walking ---------------------------------------------------------------

namespace {

struct Candidate {
  fs::path abs;
  std::string rel;
  ItemStatus status = ItemStatus::Readable;
  std::string note;
};

std::string synthetic_hash(std::string_view tag, std::string_view value) {
  return sha256_hex(std::string("scout-") + std::string(tag) + ":" + std::string(value));
}

void collect(const fs::path& root, const fs::path& dir, std::vector<Candidate>& out) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) {
    if (dir != root)
      out.push_back({dir, dir.lexically_relative(root).generic_string(), ItemStatus::Unreadable,
                     "PermissionDenied: directory unreadable (" + ec.message() + ")"});
    return;
  }
  for (; it != fs::directory_iterator(); it.increment(ec)) {
    if (ec) break;
    const auto& entry = *it;
    const auto st = entry.symlink_status(ec);
    if (ec) continue;
    const std::string rel = entry.path().lexically_relative(root).generic_string();
    if (fs::is_symlink(st)) {
      out.push_back({entry.path(), rel, ItemStatus::Symlink, "symlink not followed"});
    } else if (fs::is_directory(st)) {
      collect(root, entry.path(), out);
    } else if (fs::is_regular_file(st)) {
      out.push_back({entry.path(), rel, ItemStatus::Readable, {}});
    }
  }
}

struct HashResult {
  std::string sha256;
  std::uint64_t size = 0;
  Bytes prefix;
  bool ok = false;
  std::string error;
};

HashResult hash_with_prefix(const fs::path& path) {
  HashResult r;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    r.error = std::strerror(errno);
    return r;
  }
  Sha256 hasher;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (r.prefix.size() < kSniffBytes) {
      const auto take = std::min(got, kSniffBytes - r.prefix.size());
      r.prefix.insert(r.prefix.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(take));
    }
    hasher.update(as_bytes({buf.data(), got}));
    r.size += got;
  }
  if (in.bad()) {
    r.error = "read failed";
    return r;
  }
  r.sha256 = hasher.hex_digest();
  r.ok = true;
  return r;
}

}  // namespace

Manifest walk_evidence(const fs::path& root, CustodyLedger& ledger, const WalkOptions& opts) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(ErrorCode::RootNotFound, root.string());

  std::vector<Candidate> candidates;
  collect(root, root, candidates);
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.rel < b.rel; });

  const std::string now = format_iso(opts.clock());
  std::vector<EvidenceItem> items(candidates.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      const auto& c = candidates[i];
      EvidenceItem item;
      item.path = c.rel;
      item.detected_at = now;
      item.status = c.status;
      item.note = c.note;
      if (c.status == ItemStatus::Symlink) {
        std::error_code lec;
        const auto target = fs::read_symlink(c.abs, lec);
        item.sha256 = synthetic_hash("symlink", target.generic_string());
      } else if (c.status == ItemStatus::Unreadable) {
        item.sha256 = synthetic_hash("unreadable", c.rel);
      } else {
        auto h = hash_with_prefix(c.abs);
        if (h.ok) {
          item.sha256 = h.sha256;
          item.size_bytes = h.size;
          item.kind = detect_kind(h.prefix, c.rel);
        } else {
          item.status = ItemStatus::Unreadable;
          item.note = "PermissionDenied: " + h.error;
          item.sha256 = synthetic_hash("unreadable", c.rel);
        }
      }
      item.id = item.sha256.substr(0, 16);
      items[i] = std::move(item);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(candidates.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
  }

  Manifest m;
  m.evidence_root = fs::absolute(root).lexically_normal().generic_string();
  m.created_at = now;
  m.case_ref = opts.case_ref;
  m.items = std::move(items);
  for (const auto& item : m.items) ledger.append(CustodyAction::Registered, item.id, item.sha256);
  return m;
}

std::string current_item_hash(const fs::path& root, const EvidenceItem& item) {
  const fs::path abs = root / fs::path(item.path);
  std::error_code ec;
  const auto st = fs::symlink_status(abs, ec);
  if (ec || !fs::exists(st)) throw Error(ErrorCode::IoFailure, "missing " + item.path);
  if (fs::is_symlink(st)) return synthetic_hash("symlink", fs::read_symlink(abs, ec).generic_string());
  if (fs::is_directory(st)) {
    fs::directory_iterator probe(abs, ec);
    if (ec) return synthetic_hash("unreadable", item.path);
    throw Error(ErrorCode::IoFailure, "now readable directory " + item.path);
  }
  if (item.status == ItemStatus::Unreadable) {
    std::ifstream probe(abs, std::ios::binary);
    if (!probe) return synthetic_hash("unreadable", item.path);
  }
  return sha256_file(abs);
}

std::vector<Mismatch> verify_untouched(const Manifest& manifest, CustodyLedger& ledger) {
  std::vector<Mismatch> out;
  const fs::path root(manifest.evidence_root);
  for (const auto& item : manifest.items) {
    try {
      const auto actual = current_item_hash(root, item);
      if (actual != item.sha256) out.push_back({item.path, item.sha256, actual});
    } catch (const Error&) {
      out.push_back({item.path, item.sha256, std::nullopt});
    }
  }
  ledger.append(CustodyAction::Verified, "*", "-");
  return out;
}

bool path_within(const fs::path& inner, const fs::path& outer) {
  std::error_code ec;
  const auto a = fs::weakly_canonical(fs::absolute(inner), ec).lexically_normal();
  const auto b = fs::weakly_canonical(fs::absolute(outer), ec).lexically_normal();
  auto ia = a.begin();
  for (auto ib = b.begin(); ib != b.end(); ++ib, ++ia) {
    if (ib->empty()) continue;  // trailing separator
    if (ia == a.end() || *ia != *ib) return false;
  }
  return true;
}

// ---- serialization ---------------------------------------------------------

std::string manifest_to_json(const Manifest& m) {
  ojson j;
  j["evidence_root"] = m.evidence_root;
  j["created_at"] = m.created_at;
  j["case_ref"] = m.case_ref;
  j["items"] = ojson::array();
  for (const auto& it : m.items) {
    ojson e;
    e["id"] = it.id;
    e["path"] = it.path;
    e["kind"] = std::string(to_string(it.kind));
    e["size_bytes"] = it.size_bytes;
    e["sha256"] = it.sha256;
    e["detected_at"] = it.detected_at;
    e["status"] = std::string(to_string(it.status));
    e["note"] = it.note;
    j["items"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    Manifest m;
    m.evidence_root = j.at("evidence_root").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    m.case_ref = j.at("case_ref").get<std::string>();
    for (const auto& e : j.at("items")) {
      EvidenceItem it;
      it.id = e.at("id").get<std::string>();
      it.path = e.at("path").get<std::string>();
      it.kind = parse_evidence_kind(e.at("kind").get<std::string>()).value_or(EvidenceKind::Unknown);
      it.size_bytes = e.at("size_bytes").get<std::uint64_t>();
      it.sha256 = e.at("sha256").get<std::string>();
      it.detected_at = e.at("detected_at").get<std::string>();
      it.status = parse_item_status(e.at("status").get<std::string>()).value_or(ItemStatus::Readable);
      it.note = e.value("note", std::string());
      m.items.push_back(std::move(it));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace scout
