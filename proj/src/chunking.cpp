#include "scout/chunking.hpp"

#include <cmath>

#include "scout/common.hpp"

namespace scout {

void validate(const ModelProfile& p) {
  if (p.name.empty()) throw Error(ErrorCode::InvalidConfig, "profile without a name");
  if (p.endpoint_url.empty()) throw Error(ErrorCode::InvalidConfig, p.name + ": endpoint_url is required");
  if (p.model_id.empty()) throw Error(ErrorCode::InvalidConfig, p.name + ": model_id is required");
  if (p.max_context_tokens <= 0)
    throw Error(ErrorCode::InvalidConfig, p.name + ": max_context_tokens must be > 0");
  if (!(p.temperature >= 0.0 && p.temperature <= 2.0))
    throw Error(ErrorCode::InvalidConfig, p.name + ": temperature must be within [0, 2]");
  if (p.timeout_s <= 0) throw Error(ErrorCode::InvalidConfig, p.name + ": timeout_s must be > 0");
  if (p.max_retries < 0) throw Error(ErrorCode::InvalidConfig, p.name + ": max_retries must be >= 0");
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto end = nl == std::string_view::npos ? text.size() : nl + 1;
    out.push_back(text.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::vector<std::string_view> hard_split(std::string_view piece, std::size_t max_bytes) {
  std::vector<std::string_view> out;
  if (max_bytes == 0) return out;
  while (piece.size() > max_bytes) {
    std::size_t cut = max_bytes;
    while (cut > 0 && (static_cast<unsigned char>(piece[cut]) & 0xC0) == 0x80) --cut;
    if (cut == 0) cut = max_bytes;
    out.push_back(piece.substr(0, cut));
    piece.remove_prefix(cut);
  }
  if (!piece.empty()) out.push_back(piece);
  return out;
}

std::vector<TextChunk> pack_units(std::span<const std::string> units, std::size_t budget) {
  std::vector<TextChunk> out;
  if (budget == 0) return out;
  const std::size_t cap = byte_capacity(budget);
  TextChunk current;
  bool open = false;
  auto flush = [&] {
    if (open) {
      current.tokens = estimate_tokens(current.text);
      out.push_back(std::move(current));
      current = {};
      open = false;
    }
  };
  for (std::size_t i = 0; i < units.size(); ++i) {
    std::string_view unit = units[i];
    if (unit.empty()) continue;
    if (open && current.text.size() + unit.size() <= cap) {
      current.text += unit;
      current.last = i;
      continue;
    }
    flush();
    for (auto part : hard_split(unit, cap)) {
      flush();
      current.text = std::string(part);
      current.first = current.last = i;
      open = true;
    }
  }
  flush();
  return out;
}

std::vector<TextChunk> chunk_lines(std::string_view text, std::size_t budget) {
  std::vector<std::string> lines;
  for (auto l : split_lines(text)) lines.emplace_back(l);
  return pack_units(lines, budget);
}

std::size_t usable_budget(const ModelProfile& profile, std::size_t template_tokens) {
  const auto window = static_cast<long long>(std::floor(static_cast<double>(profile.max_context_tokens) * 0.8));
  const long long usable = window - static_cast<long long>(template_tokens);
  if (usable <= 0)
    throw Error(ErrorCode::BudgetTooSmall, profile.name + ": prompt template (" + std::to_string(template_tokens) +
                                               " tokens) exceeds usable window " + std::to_string(window));
  return static_cast<std::size_t>(usable);
}

std::vector<TextChunk> chunk_text(std::string_view text, const ModelProfile& profile, std::size_t template_tokens) {
  return chunk_lines(text, usable_budget(profile, template_tokens));
}

}  // namespace scout
