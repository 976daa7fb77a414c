#include <algorithm>
#include <array>
#include <cctype>

#include "scout/mail.hpp"

namespace scout {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

constexpr std::array<std::string_view, 24> kBlockTags{
    "p",  "div", "br", "li", "tr", "h1",    "h2",         "h3",  "h4",      "h5",     "h6",     "table",
    "ul", "ol",  "hr", "pre", "title", "blockquote", "section", "article", "header", "footer", "dt", "dd"};

std::size_t find_ci(std::string_view s, std::string_view needle, std::size_t from) {
  if (needle.empty()) return from;
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i)
    if (iequals(s.substr(i, needle.size()), needle)) return i;
  return std::string_view::npos;
}

// Returns the number of bytes consumed, 0 if `s` at `i` is not an entity.
std::size_t decode_entity(std::string_view s, std::size_t i, std::string& out) {
  const auto semi = s.find(';', i + 1);
  if (semi == std::string_view::npos || semi - i > 12) return 0;
  const auto body = s.substr(i + 1, semi - i - 1);
  if (body.empty()) return 0;
  if (body[0] == '#') {
    const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
    const auto digits = body.substr(hex ? 2 : 1);
    if (digits.empty()) return 0;
    char32_t cp = 0;
    for (char c : digits) {
      int v;
      if (c >= '0' && c <= '9') v = c - '0';
      else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
      else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
      else return 0;
      cp = cp * (hex ? 16 : 10) + static_cast<char32_t>(v);
      if (cp > 0x10FFFF) cp = 0x110000;
    }
    append_utf8(out, cp == 0 ? 0xFFFD : cp);
    return semi - i + 1;
  }
  static constexpr std::array<std::pair<std::string_view, char>, 5> kNamed{
      {{"amp", '&'}, {"lt", '<'}, {"gt", '>'}, {"quot", '"'}, {"apos", '\''}}};
  for (const auto& [name, ch] : kNamed) {
    if (body == name) {
      out.push_back(ch);
      return semi - i + 1;
    }
  }
  return 0;
}

std::string strip_once(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '<') {
      if (s.substr(i, 4) == "<!--") {
        const auto end = s.find("-->", i + 4);
        i = end == std::string_view::npos ? s.size() : end + 3;
        continue;
      }
      const char n = i + 1 < s.size() ? s[i + 1] : '\0';
      if (is_alpha(n) || n == '/' || n == '!' || n == '?') {
        const auto close = s.find('>', i + 1);
        if (close != std::string_view::npos) {
          std::size_t k = i + 1 + (n == '/' ? 1 : 0);
          const std::size_t name_start = k;
          while (k < close && (std::isalnum(static_cast<unsigned char>(s[k])))) ++k;
          const std::string name = to_lower(s.substr(name_start, k - name_start));
          if (n != '/' && (name == "script" || name == "style")) {
            const auto end_tag = find_ci(s, "</" + name, close + 1);
            if (end_tag == std::string_view::npos) {
              i = s.size();
            } else {
              const auto end_close = s.find('>', end_tag);
              i = end_close == std::string_view::npos ? s.size() : end_close + 1;
            }
            continue;
          }
          if (std::find(kBlockTags.begin(), kBlockTags.end(), name) != kBlockTags.end()) out.push_back('\n');
          else if (name == "td" || name == "th") out.push_back(' ');
          i = close + 1;
          continue;
        }
      }
    } else if (c == '&') {
      const auto used = decode_entity(s, i, out);
      if (used) {
        i += used;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      bool newline = false;
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r' || s[i] == '\f' ||
                              s[i] == '\v')) {
        newline |= s[i] == '\n' || s[i] == '\r';
        ++i;
      }
      out.push_back(newline ? '\n' : ' ');
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return trim(out);
}

}  // namespace

std::string strip_html(std::string_view html) {
  // Decoded entities can form new markup ("&lt;b&gt;"), so iterate to a fixed
  // point. Every pass that changes anything strictly shortens the text.
  std::string current = collapse_whitespace(strip_once(sanitize_utf8(html)));
  while (true) {
    std::string next = collapse_whitespace(strip_once(current));
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

}  // namespace scout
