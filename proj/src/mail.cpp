#include "scout/mail.hpp"

#include <iconv.h>

#include <algorithm>
#include <cctype>
#include <cerrno>

namespace scout {

std::string EmailMessage::header(std::string_view name) const {
  for (const auto& [k, v] : headers)
    if (iequals(k, name)) return v;
  return {};
}

// ---- decoding helpers ------------------------------------------------------

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string normalize_newlines(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

}  // namespace

std::string decode_quoted_printable(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '=') {
      out.push_back(c);
      continue;
    }
    if (i + 1 < text.size() && text[i + 1] == '\n') {  // soft line break
      ++i;
      continue;
    }
    if (i + 2 < text.size() && text[i + 1] == '\r' && text[i + 2] == '\n') {
      i += 2;
      continue;
    }
    if (i + 2 < text.size()) {
      const int hi = hex_value(text[i + 1]), lo = hex_value(text[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(c);
  }
  return out;
}

std::string to_utf8(std::string_view bytes, std::string_view charset) {
  const std::string cs = to_lower(trim(charset));
  if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii")
    return sanitize_utf8(bytes);
  iconv_t cd = ::iconv_open("UTF-8", cs.c_str());
  if (cd == reinterpret_cast<iconv_t>(-1)) return sanitize_utf8(bytes);
  std::string out;
  out.reserve(bytes.size() * 2);
  std::string in(bytes);
  char* inp = in.data();
  std::size_t inleft = in.size();
  std::string buf(4096, '\0');
  while (inleft > 0) {
    char* outp = buf.data();
    std::size_t outleft = buf.size();
    const std::size_t rc = ::iconv(cd, &inp, &inleft, &outp, &outleft);
    out.append(buf.data(), buf.size() - outleft);
    if (rc == static_cast<std::size_t>(-1)) {
      if (errno == E2BIG) continue;
      // EILSEQ / EINVAL: replace one byte and resynchronize.
      out += "\xEF\xBF\xBD";
      ++inp;
      --inleft;
      ::iconv(cd, nullptr, nullptr, nullptr, nullptr);
    }
  }
  ::iconv_close(cd);
  return sanitize_utf8(out);
}

// ---- MIME ------------------------------------------------------------------

namespace {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

struct Entity {
  HeaderList headers;
  std::string body;
};

std::string header_of(const HeaderList& h, std::string_view name) {
  for (const auto& [k, v] : h)
    if (iequals(k, name)) return v;
  return {};
}

Entity split_entity(std::string_view text) {
  Entity e;
  std::size_t body_start;
  if (!text.empty() && text[0] == '\n') {
    body_start = 1;
  } else {
    const auto sep = text.find("\n\n");
    body_start = sep == std::string_view::npos ? text.size() : sep + 2;
  }
  const auto head = text.substr(0, std::min(body_start, text.size()));
  e.body = std::string(text.substr(std::min(body_start, text.size())));
  std::size_t pos = 0;
  while (pos < head.size()) {
    auto nl = head.find('\n', pos);
    if (nl == std::string_view::npos) nl = head.size();
    const auto line = head.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    if ((line[0] == ' ' || line[0] == '\t') && !e.headers.empty()) {
      auto& value = e.headers.back().second;
      const auto cont = trim(line);
      if (!cont.empty()) value += (value.empty() ? "" : " ") + cont;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) continue;
    const auto name = line.substr(0, colon);
    if (name.find(' ') != std::string_view::npos || name.find('\t') != std::string_view::npos) continue;
    e.headers.emplace_back(std::string(name), trim(line.substr(colon + 1)));
  }
  return e;
}

struct ContentType {
  std::string type = "text/plain";
  std::vector<std::pair<std::string, std::string>> params;

  std::string param(std::string_view name) const {
    for (const auto& [k, v] : params)
      if (iequals(k, name)) return v;
    return {};
  }
};

ContentType parse_content_type(std::string_view value, std::string_view fallback = "text/plain") {
  ContentType ct;
  const auto semi = value.find(';');
  const std::string type = to_lower(trim(value.substr(0, semi)));
  ct.type = type.find('/') != std::string::npos ? type : std::string(fallback);
  std::size_t pos = semi == std::string_view::npos ? value.size() : semi + 1;
  while (pos < value.size()) {
    while (pos < value.size() && (value[pos] == ' ' || value[pos] == '\t' || value[pos] == ';')) ++pos;
    const auto eq = value.find('=', pos);
    if (eq == std::string_view::npos) break;
    const std::string key = to_lower(trim(value.substr(pos, eq - pos)));
    pos = eq + 1;
    std::string val;
    if (pos < value.size() && value[pos] == '"') {
      ++pos;
      while (pos < value.size() && value[pos] != '"') {
        if (value[pos] == '\\' && pos + 1 < value.size()) ++pos;
        val.push_back(value[pos++]);
      }
      ++pos;
    } else {
      const auto end = value.find(';', pos);
      val = trim(value.substr(pos, end == std::string_view::npos ? value.size() - pos : end - pos));
      pos = end == std::string_view::npos ? value.size() : end;
    }
    ct.params.emplace_back(key, val);
  }
  return ct;
}

std::string decode_transfer(std::string_view body, std::string_view encoding) {
  const std::string enc = to_lower(trim(encoding));
  if (enc == "base64") {
    const auto b = base64_decode(body);
    return std::string(b.begin(), b.end());
  }
  if (enc == "quoted-printable") return decode_quoted_printable(body);
  return std::string(body);
}

struct Collected {
  std::optional<std::string> plain;
  std::optional<std::string> html;
  std::vector<AttachmentMeta> attachments;
};

void walk_entity(const Entity& e, Collected& out, int depth, std::string_view default_type = "text/plain") {
  const auto ct = parse_content_type(header_of(e.headers, "Content-Type"), default_type);
  if (depth < 32 && ct.type.starts_with("multipart/")) {
    const std::string boundary = ct.param("boundary");
    if (!boundary.empty()) {
      const std::string delim = "--" + boundary;
      const std::string child_default = ct.type == "multipart/digest" ? "message/rfc822" : "text/plain";
      std::string_view body = e.body;
      std::size_t pos = 0;
      std::optional<std::size_t> part_start;
      bool done = false;
      while (pos <= body.size() && !done) {
        auto nl = body.find('\n', pos);
        if (nl == std::string_view::npos) nl = body.size();
        const auto line = body.substr(pos, nl - pos);
        const auto trimmed = std::string_view(line).substr(0, line.find_last_not_of(" \t") + 1);
        if (trimmed.starts_with(delim)) {
          const auto rest = trimmed.substr(delim.size());
          if (rest.empty() || rest == "--") {
            if (part_start) {
              auto end = pos > 0 ? pos - 1 : 0;  // drop the newline before the delimiter
              if (end < *part_start) end = *part_start;
              walk_entity(split_entity(body.substr(*part_start, end - *part_start)), out, depth + 1, child_default);
            }
            part_start = nl + 1;
            if (rest == "--") done = true;
          }
        }
        pos = nl + 1;
      }
      if (!done && part_start && *part_start < body.size())
        walk_entity(split_entity(body.substr(*part_start)), out, depth + 1, child_default);
      return;
    }
  }

  const std::string disposition = header_of(e.headers, "Content-Disposition");
  const auto disp = parse_content_type(disposition, "inline/x");
  std::string filename = disp.param("filename");
  if (filename.empty()) filename = ct.param("name");
  const bool is_attachment = istarts_with(trim(disposition), "attachment") || !filename.empty();
  const bool is_text = ct.type == "text/plain" || ct.type == "text/html";

  const std::string decoded = decode_transfer(e.body, header_of(e.headers, "Content-Transfer-Encoding"));
  if (is_text && !is_attachment) {
    const auto text = to_utf8(decoded, ct.param("charset"));
    if (ct.type == "text/plain" && !out.plain) out.plain = text;
    else if (ct.type == "text/html" && !out.html) out.html = text;
    return;
  }
  if (!is_text || is_attachment)
    out.attachments.push_back({filename, ct.type, static_cast<std::uint64_t>(decoded.size())});
}

}  // namespace

EmailMessage parse_eml(ByteView bytes) {
  const std::string text = normalize_newlines(as_text(bytes));
  const Entity top = split_entity(text);
  EmailMessage m;
  m.headers = top.headers;
  for (auto& [k, v] : m.headers) {
    k = sanitize_utf8(k);
    v = sanitize_utf8(v);
  }
  Collected c;
  walk_entity(top, c, 0);
  if (c.plain) m.body_text = *c.plain;
  else if (c.html) m.body_text = strip_html(*c.html);
  m.attachments_meta = std::move(c.attachments);
  return m;
}

std::vector<EmailMessage> parse_mbox(ByteView bytes) {
  const std::string text = normalize_newlines(as_text(bytes));
  if (!text.starts_with("From ")) throw Error(ErrorCode::NotMbox, "store does not start with a From separator");

  std::vector<std::string> raw;
  std::string current;
  bool have = false;
  bool prev_blank = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    if (last) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (prev_blank && line.starts_with("From ")) {
      if (have) {
        // The blank line before a separator belongs to the separator.
        if (current.ends_with("\n\n")) current.pop_back();
        raw.push_back(std::move(current));
      }
      current.clear();
      have = true;
      prev_blank = false;
      continue;
    }
    const auto first_non_gt = line.find_first_not_of('>');
    if (first_non_gt != std::string_view::npos && first_non_gt > 0 && line.substr(first_non_gt).starts_with("From "))
      line.remove_prefix(1);
    current.append(line);
    if (!last) current.push_back('\n');
    prev_blank = line.empty();
  }
  if (have) raw.push_back(std::move(current));

  std::vector<EmailMessage> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto m = parse_eml(as_bytes(raw[i]));
    m.index = i;
    out.push_back(std::move(m));
  }
  return out;
}

// ---- batching --------------------------------------------------------------

std::string render_email_block(const EmailMessage& m) {
  std::string s = "--- email " + std::to_string(m.index) + " ---\n";
  for (const char* h : {"From", "To", "Cc", "Date", "Subject"}) {
    const auto v = m.header(h);
    if (!v.empty() || std::string_view(h) != "Cc") s += std::string(h) + ": " + v + "\n";
  }
  if (!m.attachments_meta.empty()) {
    s += "Attachments:";
    for (std::size_t i = 0; i < m.attachments_meta.size(); ++i) {
      const auto& a = m.attachments_meta[i];
      s += (i ? ", " : " ") + (a.filename.empty() ? std::string("(unnamed)") : a.filename) + " (" + a.content_type +
           ", " + std::to_string(a.size_bytes) + " bytes)";
    }
    s += "\n";
  }
  s += "\n";
  s += m.body_text;
  if (!s.ends_with('\n')) s += "\n";
  return s;
}

namespace {

// Paragraph units: each ends after a blank line; concatenation is the input.
std::vector<std::string_view> split_paragraphs(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto sep = text.find("\n\n", pos);
    if (sep == std::string_view::npos) break;
    std::size_t end = sep + 2;
    while (end < text.size() && text[end] == '\n') ++end;
    out.push_back(text.substr(start, end - start));
    start = pos = end;
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

// Splits one oversized message block into pieces of at most `cap` bytes.
std::vector<std::string> split_block(const std::string& block, std::size_t index, std::size_t cap) {
  std::string marker = "--- email " + std::to_string(index) + " (continued) ---\n";
  if (marker.size() * 2 > cap) marker.clear();
  const std::size_t later_cap = cap - marker.size();

  std::vector<std::string_view> units;
  for (auto para : split_paragraphs(block)) {
    if (para.size() <= later_cap) {
      units.push_back(para);
      continue;
    }
    for (auto line : split_lines(para))
      for (auto part : hard_split(line, later_cap)) units.push_back(part);
  }

  std::vector<std::string> pieces;
  std::string current;
  for (auto u : units) {
    if (!current.empty() && current.size() + u.size() > cap) {
      pieces.push_back(std::move(current));
      current = marker;
    }
    current.append(u);
  }
  if (!current.empty()) pieces.push_back(std::move(current));
  return pieces;
}

}  // namespace

std::vector<TextChunk> batch_emails(std::span<const EmailMessage> messages, std::size_t budget) {
  std::vector<TextChunk> out;
  if (budget == 0) return out;
  const std::size_t cap = byte_capacity(budget);
  TextChunk current;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    current.tokens = estimate_tokens(current.text);
    out.push_back(std::move(current));
    current = {};
    open = false;
  };
  auto place = [&](const std::string& segment, std::size_t index) {
    if (open && current.text.size() + segment.size() <= cap) {
      current.text += segment;
      current.last = index;
      return;
    }
    flush();
    current.text = segment;
    current.first = current.last = index;
    open = true;
  };
  for (const auto& m : messages) {
    const std::string block = render_email_block(m);
    if (block.size() <= cap) {
      place(block, m.index);
      continue;
    }
    for (const auto& piece : split_block(block, m.index, cap)) place(piece, m.index);
  }
  flush();
  return out;
}

}  // namespace scout
