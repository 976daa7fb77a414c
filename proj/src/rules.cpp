#include "scout/rules.hpp"

#include <algorithm>

namespace scout {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Low: return "low";
    case Severity::Medium: return "medium";
    case Severity::High: return "high";
  }
  return "low";
}

Severity parse_severity(std::string_view s) {
  const auto v = to_lower(trim(s));
  if (v == "high") return Severity::High;
  if (v == "medium") return Severity::Medium;
  return Severity::Low;
}

const std::vector<std::string>& registered_rules() {
  static const std::vector<std::string> kRules{std::string(rule_ids::kMetadataAnomaly),
                                               std::string(rule_ids::kSuspiciousAuthor),
                                               std::string(rule_ids::kFutureTimestamp),
                                               std::string(rule_ids::kUnprocessable)};
  return kRules;
}

bool RuleConfig::is_enabled(std::string_view id) const {
  return std::find(enabled.begin(), enabled.end(), id) != enabled.end();
}

std::vector<RuleFlag> metadata_rule_flags(const DocMetadata& meta, const RuleConfig& rules, UtcTime analysis_time) {
  std::vector<RuleFlag> flags;
  if (rules.is_enabled(rule_ids::kMetadataAnomaly) && meta.created && meta.modified && *meta.modified < *meta.created) {
    flags.push_back({"metadata-anomaly", Severity::High,
                     "last modification (" + format_iso(*meta.modified) + ") precedes creation (" +
                         format_iso(*meta.created) + ")",
                     std::string(rule_ids::kMetadataAnomaly)});
  }
  if (rules.is_enabled(rule_ids::kSuspiciousAuthor) && meta.last_modified_by) {
    const auto& who = *meta.last_modified_by;
    const bool listed = std::any_of(rules.suspicious_authors.begin(), rules.suspicious_authors.end(),
                                    [&](const std::string& s) { return iequals(trim(s), trim(who)); });
    if (listed)
      flags.push_back({"suspicious-author", Severity::Medium, "last modified by generic account \"" + who + "\"",
                       std::string(rule_ids::kSuspiciousAuthor)});
  }
  if (rules.is_enabled(rule_ids::kFutureTimestamp)) {
    std::vector<std::string> which;
    if (meta.created && *meta.created > analysis_time) which.push_back("created " + format_iso(*meta.created));
    if (meta.modified && *meta.modified > analysis_time) which.push_back("modified " + format_iso(*meta.modified));
    if (!which.empty()) {
      std::string why = "timestamp later than the analysis time:";
      for (const auto& w : which) why += " " + w;
      flags.push_back({"future-timestamp", Severity::Medium, why, std::string(rule_ids::kFutureTimestamp)});
    }
  }
  return flags;
}

RuleFlag unprocessable_flag(std::string_view reason) {
  return {"unprocessable", Severity::Low,
          reason.empty() ? std::string("extraction failed") : std::string(reason),
          std::string(rule_ids::kUnprocessable)};
}

}  // namespace scout
