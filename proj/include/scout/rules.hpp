#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scout/common.hpp"
#include "scout/docx.hpp"

namespace scout {

enum class Severity { Low, Medium, High };

std::string_view to_string(Severity s);
/// Unknown strings map to Low.
Severity parse_severity(std::string_view s);

struct RuleFlag {
  std::string label;
  Severity severity = Severity::Low;
  std::string rationale;
  std::string rule_id;

  bool operator==(const RuleFlag&) const = default;
};

namespace rule_ids {
inline constexpr std::string_view kMetadataAnomaly = "metadata-anomaly";
inline constexpr std::string_view kSuspiciousAuthor = "suspicious-author";
inline constexpr std::string_view kFutureTimestamp = "future-timestamp";
inline constexpr std::string_view kUnprocessable = "unprocessable";
}  // namespace rule_ids

/// Every registered rule id, in evaluation order.
const std::vector<std::string>& registered_rules();

struct RuleConfig {
  std::vector<std::string> suspicious_authors{"Admin", "Administrator"};
  std::vector<std::string> enabled = registered_rules();

  bool is_enabled(std::string_view id) const;
};

/// Pure: the future-timestamp rule compares against `analysis_time`, never the wall clock.
std::vector<RuleFlag> metadata_rule_flags(const DocMetadata& meta, const RuleConfig& rules, UtcTime analysis_time);

/// Low-severity flag attached to items whose extraction failed.
RuleFlag unprocessable_flag(std::string_view reason);

}  // namespace scout
