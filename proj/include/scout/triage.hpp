#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scout/custody.hpp"
#include "scout/evidence.hpp"
#include "scout/extract.hpp"
#include "scout/gateway.hpp"
#include "scout/rules.hpp"

namespace scout {

struct CaseContext {
  std::string case_id;
  std::string background;
  std::vector<std::string> keywords;  // lowercase, unique, first-seen order
  std::string extra_instructions;

  bool operator==(const CaseContext&) const = default;
};

/// Normalizes keywords; throws Error(InvalidConfig) for an empty case id.
CaseContext make_case_context(std::string case_id, std::string background, const std::vector<std::string>& keywords,
                              std::string extra_instructions = {});

nlohmann::ordered_json case_to_json(const CaseContext& c);
CaseContext case_from_json(const nlohmann::json& j);

// ---- prompts ---------------------------------------------------------------

inline constexpr std::string_view kTemplateVersion = "v1";

/// e.g. "pcap/v1"; recorded with every run.
std::string template_id(EvidenceKind kind);
std::string system_prompt(EvidenceKind kind, const CaseContext& ctx);
/// Tokens the prompt adds around a text unit.
std::size_t template_tokens(EvidenceKind kind, const CaseContext& ctx);

/// System template plus the unit: chunk text verbatim, or caption and media.
std::vector<ChatMessage> build_prompt(EvidenceKind kind, const CaseContext& ctx, const ExtractionUnit& unit);

// ---- verdicts --------------------------------------------------------------

enum class ParseStatus { Structured, Degraded };
std::string_view to_string(ParseStatus s);

struct VerdictFlag {
  std::string label;
  Severity severity = Severity::Low;
  std::string rationale;

  bool operator==(const VerdictFlag&) const = default;
};

struct Verdict {
  int relevance = 0;
  std::vector<VerdictFlag> flags;
  std::string summary;
  ParseStatus parse_status = ParseStatus::Degraded;

  bool operator==(const Verdict&) const = default;
};

inline constexpr std::size_t kSummaryChars = 500;

/// Total over arbitrary bytes.
Verdict parse_verdict(std::string_view raw);

inline constexpr std::string_view kModelUnavailable = "model-unavailable";
Verdict unavailable_verdict(std::string_view reason);

// ---- runs ------------------------------------------------------------------

struct AnalysisRun {
  std::string run_id;
  std::string evidence_id;
  std::string chunk_ref;
  std::size_t chunk_index = 0;
  std::string profile_name;
  int repetition = 0;
  std::string template_id;
  std::string request_digest;
  nlohmann::ordered_json request;  // canonical form the digest covers
  std::string raw_response;
  Verdict verdict;
  std::string started_at;
  std::string finished_at;
  int attempt_count = 0;
  long latency_ms = 0;
  std::string error;

  /// The gateway failed; rerunning analyze retries this run.
  bool model_unavailable() const { return !error.empty(); }
};

/// First 16 hex of sha256 over the resumption key.
std::string make_run_id(std::string_view evidence_id, EvidenceKind kind, std::string_view profile,
                        std::string_view chunk_ref, int repetition);

nlohmann::ordered_json verdict_to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_to_json(const AnalysisRun& r);
AnalysisRun run_from_json(const nlohmann::json& j);

/// One JSON file per run; no shared file, so concurrent writers never contend.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void save(const AnalysisRun& run) const;
  std::optional<AnalysisRun> load(std::string_view run_id) const;
  /// Sorted by run_id.
  std::vector<AnalysisRun> load_all() const;

 private:
  std::filesystem::path dir_;
};

// ---- scoring ---------------------------------------------------------------

/// max relevance + 0.5 per distinct high label, floor 7 on a high rule flag, capped at 10.
double score_evidence(std::span<const AnalysisRun> runs, std::span<const RuleFlag> rule_flags);

struct PriorityEntry {
  std::string evidence_id;
  std::string path;
  double aggregate_score = 0;
  int rank = 0;
  std::vector<std::string> contributing_runs;
  std::vector<RuleFlag> rule_flags;

  bool operator==(const PriorityEntry&) const = default;
};

/// Score descending, path ascending; ranks 1..N.
std::vector<PriorityEntry> rank_corpus(std::vector<PriorityEntry> entries);

// ---- orchestration ---------------------------------------------------------

struct AnalyzeContext {
  Gateway* gateway = nullptr;
  RunStore* store = nullptr;      // optional
  CustodyLedger* ledger = nullptr;  // optional
  Clock clock = system_clock_source();
};

/// Units x profiles x repetitions, in that order. Healthy runs already in
/// the store are reused without a model call. Gateway failures become
/// model-unavailable runs; nothing here throws for a single bad call.
std::vector<AnalysisRun> analyze_evidence(const EvidenceItem& item, const ExtractionResult& extraction,
                                          const CaseContext& ctx, const std::vector<std::string>& profiles,
                                          int runs_per_chunk, const AnalyzeContext& actx);

}  // namespace scout
