#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scout/common.hpp"

namespace scout {

/// Read-only view of a zip archive's central directory.
class ZipArchive {
 public:
  struct Entry {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t compressed_size = 0;
    std::uint32_t uncompressed_size = 0;
    std::uint32_t local_header_offset = 0;
  };

  /// Throws Error(NotZip) without a local-file signature, Error(CorruptArchive)
  /// when the end-of-central-directory record or the directory is unreadable.
  explicit ZipArchive(ByteView bytes);

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(std::string_view name) const;
  /// Stored and deflated members. Throws Error(CorruptArchive).
  std::string read(const Entry& e) const;
  std::optional<std::string> read(std::string_view name) const;

 private:
  ByteView bytes_;
  std::vector<Entry> entries_;
};

struct DocMetadata {
  std::optional<UtcTime> created;
  std::optional<UtcTime> modified;
  std::optional<std::string> last_modified_by;
  std::optional<std::string> author;
  std::optional<std::string> title;

  bool operator==(const DocMetadata&) const = default;
};

struct DocContent {
  std::string text;
  DocMetadata metadata;
  std::string format_note;
};

DocContent extract_docx(ByteView bytes);

/// Decodes XML character data (the five named entities and numeric references).
std::string xml_unescape(std::string_view s);

/// Metadata header + body text, the form handed to the model.
std::string render_document(const DocContent& doc);

}  // namespace scout
