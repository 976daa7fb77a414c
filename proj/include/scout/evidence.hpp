#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scout/common.hpp"
#include "scout/custody.hpp"

namespace scout {

enum class EvidenceKind { Pcap, Mbox, Eml, Docx, Html, PlainText, Audio, Image, Video, Unknown };

std::string_view to_string(EvidenceKind k);
std::optional<EvidenceKind> parse_evidence_kind(std::string_view s);

/// How the file looked when it was registered.
enum class ItemStatus { Readable, Unreadable, Symlink };
std::string_view to_string(ItemStatus s);
std::optional<ItemStatus> parse_item_status(std::string_view s);

struct EvidenceItem {
  std::string id;  // first 16 hex chars of sha256
  std::string path;  // generic form, relative to the evidence root
  EvidenceKind kind = EvidenceKind::Unknown;
  std::uint64_t size_bytes = 0;
  std::string sha256;
  std::string detected_at;
  ItemStatus status = ItemStatus::Readable;
  std::string note;

  bool operator==(const EvidenceItem&) const = default;
};

struct Manifest {
  std::string evidence_root;
  std::string created_at;
  std::string case_ref;
  std::vector<EvidenceItem> items;  // sorted by path, unique

  const EvidenceItem* find_by_id(std::string_view id) const;
  bool operator==(const Manifest&) const = default;
};

inline constexpr std::size_t kSniffBytes = 512;

/// Content first, extension only to refine a content match. Total.
EvidenceKind detect_kind(ByteView prefix, std::string_view filename);

struct WalkOptions {
  std::string case_ref;
  unsigned workers = 4;
  Clock clock = system_clock_source();
};

/// Recursively registers every entry under `root` without following
/// symlinks and without opening anything for writing.
Manifest walk_evidence(const std::filesystem::path& root, CustodyLedger& ledger, const WalkOptions& opts = {});

/// Recomputes the stored hash the same way walk_evidence derived it.
std::string current_item_hash(const std::filesystem::path& root, const EvidenceItem& item);

struct Mismatch {
  std::string path;
  std::string expected_sha256;
  std::optional<std::string> actual_sha256;  // nullopt: missing or unreadable

  bool operator==(const Mismatch&) const = default;
};

std::vector<Mismatch> verify_untouched(const Manifest& manifest, CustodyLedger& ledger);

/// True if `inner` is `outer` or lies beneath it after normalization.
bool path_within(const std::filesystem::path& inner, const std::filesystem::path& outer);

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(std::string_view text);

}  // namespace scout
