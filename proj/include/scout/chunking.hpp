#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scout/profile.hpp"

namespace scout {

/// A slice of model input. `first`/`last` index the producer's units
/// (packets, messages, lines) covered by the chunk, inclusive.
struct TextChunk {
  std::string text;
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t tokens = 0;

  bool operator==(const TextChunk&) const = default;
};

/// ceil(bytes / 4). Overcounts for most tokenizers; monotone in length.
constexpr std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

/// Largest byte count whose estimate stays within `budget`.
constexpr std::size_t byte_capacity(std::size_t budget) { return budget * 4; }

/// Splits after every '\n'; the last piece may lack one. Concatenation is the input.
std::vector<std::string_view> split_lines(std::string_view text);

/// Cuts `piece` into parts of at most `max_bytes`, preferring UTF-8 boundaries.
std::vector<std::string_view> hard_split(std::string_view piece, std::size_t max_bytes);

/// Greedy packing of ordered units into chunks with estimate <= budget.
/// A unit larger than the budget is hard-split across consecutive chunks.
std::vector<TextChunk> pack_units(std::span<const std::string> units, std::size_t budget);

/// Line-first chunking of free text; concatenating the chunks yields `text`.
std::vector<TextChunk> chunk_lines(std::string_view text, std::size_t budget);

/// floor(max_context_tokens * 0.8) - template_tokens. Throws Error(BudgetTooSmall).
std::size_t usable_budget(const ModelProfile& profile, std::size_t template_tokens);

std::vector<TextChunk> chunk_text(std::string_view text, const ModelProfile& profile, std::size_t template_tokens);

}  // namespace scout
