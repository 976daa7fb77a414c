#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scout/custody.hpp"
#include "scout/evidence.hpp"
#include "scout/extract.hpp"
#include "scout/triage.hpp"

namespace scout {

struct RunSummary {
  std::string run_id;
  std::string profile;
  std::string chunk_ref;
  int relevance = 0;
  std::string parse_status;
  std::string summary;
  std::vector<VerdictFlag> flags;

  bool operator==(const RunSummary&) const = default;
};

struct ReportEntry {
  int rank = 0;
  double score = 0;
  std::string evidence_id;
  std::string path;
  std::string kind;
  std::string sha256;
  std::string status;  // ok, extraction-failed, unknown-kind, not-analyzed
  std::vector<RuleFlag> rule_flags;
  std::vector<std::string> contributing_runs;
  std::vector<RunSummary> runs;

  bool operator==(const ReportEntry&) const = default;
};

struct CorpusStats {
  std::size_t total_items = 0;
  std::size_t analyzed = 0;
  std::size_t extraction_failed = 0;
  std::size_t unknown_kind = 0;

  bool operator==(const CorpusStats&) const = default;
};

struct Report {
  std::string generated_at;
  std::string ledger_head;
  std::string tool_version;
  CaseContext case_context;
  CorpusStats corpus_stats;
  std::vector<ReportEntry> entries;
  std::vector<std::string> caveats;

  bool operator==(const Report&) const = default;
};

/// Fixed text, always embedded; no configuration removes it.
const std::vector<std::string>& report_caveats();

/// Scores, ranks and assembles every manifest item. `ledger_head` is the
/// latest non-report record, so regenerating from the same runs binds to the same head.
Report build_report(const CaseContext& ctx, const Manifest& manifest, const std::vector<ExtractionResult>& extractions,
                    const std::vector<AnalysisRun>& runs, const CustodyLedger& ledger, UtcTime generated_at);

/// Canonical: fixed key order, two-space indent, LF, trailing newline.
/// Generation-time values live only under the top-level "generation" key.
std::string render_json(const Report& r);
std::string render_markdown(const Report& r);
Report report_from_json(std::string_view text);

/// Highest-severity labels first, at most `limit`.
std::vector<std::string> top_flags(const ReportEntry& e, std::size_t limit = 3);

}  // namespace scout
