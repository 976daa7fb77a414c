#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scout/evidence.hpp"
#include "scout/media.hpp"
#include "scout/profile.hpp"
#include "scout/rules.hpp"

namespace scout {

enum class ExtractionStatus { Ok, Failed, UnknownKind };
std::string_view to_string(ExtractionStatus s);
std::optional<ExtractionStatus> parse_extraction_status(std::string_view s);

/// One model request's worth of evidence: a text chunk or media plus caption.
struct ExtractionUnit {
  std::string ref;  // chunk-N, image-N, video-N, segment-N
  std::string text;
  std::vector<MediaAttachment> attachments;
  std::size_t first = 0;
  std::size_t last = 0;
};

struct ExtractionResult {
  std::string evidence_id;
  std::string path;
  EvidenceKind kind = EvidenceKind::Unknown;
  ExtractionStatus status = ExtractionStatus::Ok;
  std::string extractor;
  std::string failure;
  std::vector<ExtractionUnit> units;
  std::vector<RuleFlag> rule_flags;

  Modality modality() const;
};

/// External command that turns an otherwise unsupported file into text.
/// "{path}" in the argument list is replaced by the file; otherwise the path is appended.
struct ConverterHook {
  std::vector<std::string> command;
  std::vector<std::string> extensions;  // lowercase, with dot

  bool handles(const std::filesystem::path& file) const;
};

/// Runs the hook without a shell and returns its standard output.
/// Throws Error(IoFailure) on spawn failure or non-zero exit.
std::string run_converter(const ConverterHook& hook, const std::filesystem::path& file);

struct ExtractOptions {
  std::size_t text_budget = 100000;  // tokens per text unit
  int image_max_dim = 1024;
  double video_max_duration_s = 1500;
  AsrEndpoint asr;
  ConverterHook converter;
  RuleConfig rules;
  UtcTime analysis_time{};
};

/// Total: every failure becomes status Failed with an unprocessable rule flag.
/// Evidence is opened read-only and its hash checked against the manifest first.
ExtractionResult extract_evidence(const std::filesystem::path& root, const EvidenceItem& item,
                                  const ExtractOptions& opts);

/// Persisted shape: unit refs and flags, no unit payloads.
nlohmann::ordered_json extraction_to_json(const ExtractionResult& r);
ExtractionResult extraction_from_json(const nlohmann::json& j);

nlohmann::ordered_json rule_flag_to_json(const RuleFlag& f);
RuleFlag rule_flag_from_json(const nlohmann::json& j);

}  // namespace scout
