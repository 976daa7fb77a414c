#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scout/chunking.hpp"
#include "scout/common.hpp"

namespace scout {

struct AttachmentMeta {
  std::string filename;
  std::string content_type;
  std::uint64_t size_bytes = 0;
  bool operator==(const AttachmentMeta&) const = default;
};

struct EmailMessage {
  std::size_t index = 0;
  /// In original order, unfolded, values otherwise verbatim.
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body_text;
  std::vector<AttachmentMeta> attachments_meta;

  /// First header with this name (case-insensitive), or "".
  std::string header(std::string_view name) const;
  bool operator==(const EmailMessage&) const = default;
};

/// Never throws; malformed input yields best-effort headers and maybe an empty body.
EmailMessage parse_eml(ByteView bytes);

/// Throws Error(NotMbox) unless the store starts with a "From " separator.
std::vector<EmailMessage> parse_mbox(ByteView bytes);

std::string decode_quoted_printable(std::string_view text);

/// Converts `bytes` in `charset` to UTF-8; invalid input becomes U+FFFD.
std::string to_utf8(std::string_view bytes, std::string_view charset);

/// `--- email <index> ---` blocks packed greedily into chunks. A message
/// larger than the budget is split at paragraph boundaries and each later
/// piece opens with `--- email <index> (continued) ---`.
std::vector<TextChunk> batch_emails(std::span<const EmailMessage> messages, std::size_t budget);

std::string render_email_block(const EmailMessage& m);

/// Removes tags, script/style content and comments, decodes the basic
/// entities and numeric references, collapses whitespace. Idempotent.
std::string strip_html(std::string_view html);

}  // namespace scout
