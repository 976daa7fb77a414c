#include "scout/triage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "scout/chunking.hpp"

namespace scout {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---- case ------------------------------------------------------------------

CaseContext make_case_context(std::string case_id, std::string background, const std::vector<std::string>& keywords,
                              std::string extra_instructions) {
  CaseContext c;
  c.case_id = trim(case_id);
  if (c.case_id.empty()) throw Error(ErrorCode::InvalidConfig, "case id must not be empty");
  c.background = std::move(background);
  c.extra_instructions = std::move(extra_instructions);
  for (const auto& k : keywords) {
    auto norm = to_lower(trim(k));
    if (norm.empty()) continue;
    if (std::find(c.keywords.begin(), c.keywords.end(), norm) == c.keywords.end()) c.keywords.push_back(std::move(norm));
  }
  return c;
}

ordered_json case_to_json(const CaseContext& c) {
  ordered_json j;
  j["id"] = c.case_id;
  j["background"] = c.background;
  j["keywords"] = c.keywords;
  j["extra_instructions"] = c.extra_instructions;
  return j;
}

CaseContext case_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "case must be a JSON object");
  const auto& src = j.contains("case") && j["case"].is_object() ? j["case"] : j;
  std::vector<std::string> kws;
  if (src.contains("keywords")) {
    if (!src["keywords"].is_array()) throw Error(ErrorCode::InvalidConfig, "case.keywords must be a list");
    for (const auto& k : src["keywords"]) {
      if (!k.is_string()) throw Error(ErrorCode::InvalidConfig, "case.keywords must hold strings");
      kws.push_back(k.get<std::string>());
    }
  }
  auto str = [&](const char* key) {
    if (!src.contains(key) || src[key].is_null()) return std::string();
    if (!src[key].is_string()) throw Error(ErrorCode::InvalidConfig, std::string("case.") + key + " must be a string");
    return src[key].get<std::string>();
  };
  return make_case_context(str("id"), str("background"), kws, str("extra_instructions"));
}

// ---- prompts ---------------------------------------------------------------

namespace {

std::string_view task_text(EvidenceKind kind) {
  switch (kind) {
    case EvidenceKind::Pcap:
      return "The evidence is a network packet capture rendered one packet per line as index, timestamp and decoded "
             "protocol summary. Identify hosts, domain lookups, errors and traffic patterns that matter to the case.";
    case EvidenceKind::Mbox:
    case EvidenceKind::Eml:
      return "The evidence is a batch of emails, each opening with a '--- email N ---' header block. Identify the "
             "people involved, the links between them and any message that matters to the case.";
    case EvidenceKind::Docx:
    case EvidenceKind::Html:
    case EvidenceKind::PlainText:
      return "The evidence is a document, preceded by its metadata when available. Examine both the content and the "
             "metadata for irregularities that matter to the case.";
    case EvidenceKind::Audio:
      return "The evidence is the transcript of an audio recording. Raise an alert for any red flag it contains.";
    case EvidenceKind::Image:
      return "The evidence is an image. Describe what it shows and point out anything that matters to the case.";
    case EvidenceKind::Video:
      return "The evidence is a video, or frames sampled from it with their timestamps. Describe the activity shown "
             "and point out anything that matters to the case.";
    case EvidenceKind::Unknown:
      return "The evidence is text converted from a file of an unsupported type. Point out anything that matters to "
             "the case.";
  }
  return "";
}

constexpr std::string_view kPreamble =
    "You are assisting an authorized forensic examination conducted under lawful process. The material below was "
    "seized as evidence and the investigator is permitted to review it; analyzing it is part of that examination. "
    "Your output is a triage aid only and will be verified by the investigator.";

constexpr std::string_view kContract =
    "End your reply with a fenced code block labeled json containing exactly "
    "{\"relevance\": 0-10 integer, \"flags\": [{\"label\": string, \"severity\": \"low\"|\"medium\"|\"high\", "
    "\"rationale\": string}], \"summary\": string}.";

// Covers role framing around the user text in the wire format.
constexpr std::size_t kMessageOverhead = 16;

}  // namespace

std::string template_id(EvidenceKind kind) { return std::string(to_string(kind)) + "/" + std::string(kTemplateVersion); }

std::string system_prompt(EvidenceKind kind, const CaseContext& ctx) {
  std::string s = "[scout template " + template_id(kind) + "]\n";
  s += kPreamble;
  s += "\n\n";
  s += task_text(kind);
  s += "\n\nCase: " + ctx.case_id + "\n";
  s += "Background: " + (ctx.background.empty() ? std::string("(none provided)") : ctx.background) + "\n";
  s += "Keywords:";
  if (ctx.keywords.empty()) s += " (none)";
  s += "\n";
  for (const auto& k : ctx.keywords) s += "- " + k + "\n";
  if (!ctx.extra_instructions.empty()) s += "Additional instructions: " + ctx.extra_instructions + "\n";
  s += "\n";
  s += kContract;
  return s;
}

std::size_t template_tokens(EvidenceKind kind, const CaseContext& ctx) {
  return estimate_tokens(system_prompt(kind, ctx)) + kMessageOverhead;
}

std::vector<ChatMessage> build_prompt(EvidenceKind kind, const CaseContext& ctx, const ExtractionUnit& unit) {
  return {ChatMessage{Role::System, system_prompt(kind, ctx), {}}, ChatMessage{Role::User, unit.text, unit.attachments}};
}

// ---- verdicts --------------------------------------------------------------

std::string_view to_string(ParseStatus s) { return s == ParseStatus::Structured ? "structured" : "degraded"; }

namespace {

std::optional<std::string_view> last_fenced_json(std::string_view raw) {
  std::optional<std::string_view> found;
  std::size_t pos = 0;
  while ((pos = raw.find("```", pos)) != std::string_view::npos) {
    const std::size_t label = pos + 3;
    if (!istarts_with(raw.substr(label), "json")) {
      pos = label;
      continue;
    }
    const std::size_t body = label + 4;
    const std::size_t end = raw.find("```", body);
    if (end == std::string_view::npos) break;
    found = raw.substr(body, end - body);
    pos = end + 3;
  }
  return found;
}

std::optional<std::string_view> last_balanced_object(std::string_view raw) {
  std::optional<std::string_view> found;
  int depth = 0;
  bool in_string = false, escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (depth == 0) {
      if (c == '{') {
        depth = 1;
        start = i;
        in_string = escaped = false;
      }
      continue;
    }
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) found = raw.substr(start, i - start + 1);
  }
  return found;
}

std::optional<Verdict> check_schema(std::string_view candidate) {
  const auto j = nlohmann::json::parse(candidate, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("relevance")) return std::nullopt;
  const auto& rel = j["relevance"];
  if (!rel.is_number()) return std::nullopt;
  const double r = rel.get<double>();
  if (std::isnan(r)) return std::nullopt;
  Verdict v;
  v.parse_status = ParseStatus::Structured;
  v.relevance = static_cast<int>(std::lround(std::clamp(r, 0.0, 10.0)));
  if (j.contains("flags") && !j["flags"].is_null()) {
    if (!j["flags"].is_array()) return std::nullopt;
    for (const auto& f : j["flags"]) {
      if (!f.is_object() || !f.contains("label") || !f["label"].is_string()) return std::nullopt;
      VerdictFlag vf;
      vf.label = f["label"].get<std::string>();
      if (f.contains("severity") && f["severity"].is_string()) vf.severity = parse_severity(f["severity"].get<std::string>());
      if (f.contains("rationale") && f["rationale"].is_string()) vf.rationale = f["rationale"].get<std::string>();
      v.flags.push_back(std::move(vf));
    }
  }
  if (j.contains("summary") && j["summary"].is_string()) v.summary = j["summary"].get<std::string>();
  return v;
}

std::string excerpt(std::string_view raw) {
  const std::string clean = sanitize_utf8(raw);
  std::size_t pos = 0, count = 0;
  while (pos < clean.size() && count < kSummaryChars) {
    const auto lead = static_cast<unsigned char>(clean[pos]);
    pos += lead < 0x80 ? 1 : lead < 0xE0 ? 2 : lead < 0xF0 ? 3 : 4;
    ++count;
  }
  return clean.substr(0, std::min(pos, clean.size()));
}

}  // namespace

Verdict parse_verdict(std::string_view raw) {
  try {
    if (auto block = last_fenced_json(raw))
      if (auto v = check_schema(*block)) return *v;
    if (auto obj = last_balanced_object(raw))
      if (auto v = check_schema(*obj)) return *v;
  } catch (...) {
  }
  Verdict v;
  v.parse_status = ParseStatus::Degraded;
  bool alarm = false;
  for (std::string_view needle : {"red flag", "suspicious", "anomal", "tamper"}) alarm = alarm || icontains(raw, needle);
  v.relevance = alarm ? 5 : 1;
  v.summary = excerpt(raw);
  if (trim(v.summary).empty()) v.summary = "(empty model response)";
  return v;
}

Verdict unavailable_verdict(std::string_view reason) {
  Verdict v;
  v.relevance = 0;
  v.parse_status = ParseStatus::Degraded;
  const std::string why = reason.empty() ? std::string("model endpoint unavailable") : excerpt(reason);
  v.flags.push_back({std::string(kModelUnavailable), Severity::Low, why});
  v.summary = "No model verdict: " + why;
  return v;
}

// ---- runs ------------------------------------------------------------------

std::string make_run_id(std::string_view evidence_id, EvidenceKind kind, std::string_view profile,
                        std::string_view chunk_ref, int repetition) {
  std::string key;
  key.append(evidence_id).append("|").append(to_string(kind)).append("|").append(profile).append("|");
  key.append(chunk_ref).append("|").append(std::to_string(repetition));
  return sha256_hex(key).substr(0, 16);
}

ordered_json verdict_to_json(const Verdict& v) {
  ordered_json j;
  j["relevance"] = v.relevance;
  j["flags"] = ordered_json::array();
  for (const auto& f : v.flags)
    j["flags"].push_back({{"label", f.label}, {"severity", to_string(f.severity)}, {"rationale", f.rationale}});
  j["summary"] = v.summary;
  j["parse_status"] = to_string(v.parse_status);
  return j;
}

Verdict verdict_from_json(const nlohmann::json& j) {
  Verdict v;
  v.relevance = j.at("relevance").get<int>();
  for (const auto& f : j.at("flags"))
    v.flags.push_back({f.at("label").get<std::string>(), parse_severity(f.at("severity").get<std::string>()),
                       f.at("rationale").get<std::string>()});
  v.summary = j.at("summary").get<std::string>();
  v.parse_status = j.at("parse_status").get<std::string>() == "structured" ? ParseStatus::Structured : ParseStatus::Degraded;
  return v;
}

ordered_json run_to_json(const AnalysisRun& r) {
  ordered_json j;
  j["run_id"] = r.run_id;
  j["evidence_id"] = r.evidence_id;
  j["chunk_ref"] = r.chunk_ref;
  j["chunk_index"] = r.chunk_index;
  j["profile_name"] = r.profile_name;
  j["repetition"] = r.repetition;
  j["template_id"] = r.template_id;
  j["request_digest"] = r.request_digest;
  j["request"] = r.request;
  j["raw_response"] = r.raw_response;
  j["verdict"] = verdict_to_json(r.verdict);
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
  j["attempt_count"] = r.attempt_count;
  j["latency_ms"] = r.latency_ms;
  j["error"] = r.error;
  return j;
}

AnalysisRun run_from_json(const nlohmann::json& j) {
  AnalysisRun r;
  r.run_id = j.at("run_id").get<std::string>();
  r.evidence_id = j.at("evidence_id").get<std::string>();
  r.chunk_ref = j.at("chunk_ref").get<std::string>();
  r.chunk_index = j.at("chunk_index").get<std::size_t>();
  r.profile_name = j.at("profile_name").get<std::string>();
  r.repetition = j.at("repetition").get<int>();
  r.template_id = j.at("template_id").get<std::string>();
  r.request_digest = j.at("request_digest").get<std::string>();
  r.request = ordered_json::parse(j.at("request").dump());
  r.raw_response = j.at("raw_response").get<std::string>();
  r.verdict = verdict_from_json(j.at("verdict"));
  r.started_at = j.at("started_at").get<std::string>();
  r.finished_at = j.at("finished_at").get<std::string>();
  r.attempt_count = j.at("attempt_count").get<int>();
  r.latency_ms = j.at("latency_ms").get<long>();
  r.error = j.at("error").get<std::string>();
  return r;
}

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void RunStore::save(const AnalysisRun& run) const {
  write_file_atomic(dir_ / (run.run_id + ".json"), run_to_json(run).dump(2) + "\n");
}

std::optional<AnalysisRun> RunStore::load(std::string_view run_id) const {
  const auto p = dir_ / (std::string(run_id) + ".json");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_text_file(p), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  try {
    return run_from_json(j);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<AnalysisRun> RunStore::load_all() const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir_, ec))
    if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  std::vector<AnalysisRun> out;
  for (const auto& id : ids)
    if (auto r = load(id)) out.push_back(std::move(*r));
  return out;
}

// ---- scoring ---------------------------------------------------------------

double score_evidence(std::span<const AnalysisRun> runs, std::span<const RuleFlag> rule_flags) {
  double base = 0;
  std::set<std::string> high;
  for (const auto& r : runs) {
    base = std::max(base, static_cast<double>(r.verdict.relevance));
    for (const auto& f : r.verdict.flags)
      if (f.severity == Severity::High) high.insert(f.label);
  }
  bool high_rule = false;
  for (const auto& f : rule_flags) {
    if (f.severity != Severity::High) continue;
    high.insert(f.label);
    high_rule = true;
  }
  if (high_rule) base = std::max(base, 7.0);
  return std::min(10.0, base + 0.5 * static_cast<double>(high.size()));
}

std::vector<PriorityEntry> rank_corpus(std::vector<PriorityEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const PriorityEntry& a, const PriorityEntry& b) {
    if (a.aggregate_score != b.aggregate_score) return a.aggregate_score > b.aggregate_score;
    if (a.path != b.path) return a.path < b.path;
    return a.evidence_id < b.evidence_id;
  });
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = static_cast<int>(i + 1);
  return entries;
}

// ---- orchestration ---------------------------------------------------------

std::vector<AnalysisRun> analyze_evidence(const EvidenceItem& item, const ExtractionResult& extraction,
                                          const CaseContext& ctx, const std::vector<std::string>& profiles,
                                          int runs_per_chunk, const AnalyzeContext& actx) {
  if (runs_per_chunk < 1) throw Error(ErrorCode::InvalidConfig, "runs_per_chunk must be >= 1");
  if (!actx.gateway) throw Error(ErrorCode::InvalidConfig, "analyze_evidence needs a gateway");
  std::vector<AnalysisRun> out;
  const auto tid = template_id(item.kind);
  for (std::size_t u = 0; u < extraction.units.size(); ++u) {
    const auto& unit = extraction.units[u];
    for (const auto& profile : profiles) {
      ChatRequest req{profile, build_prompt(item.kind, ctx, unit)};
      const auto canonical = canonical_request(req);
      const auto digest = sha256_hex(canonical.dump());
      for (int rep = 0; rep < runs_per_chunk; ++rep) {
        const auto run_id = make_run_id(item.id, item.kind, profile, unit.ref, rep);
        if (actx.store) {
          if (auto prior = actx.store->load(run_id); prior && !prior->model_unavailable()) {
            out.push_back(std::move(*prior));
            continue;
          }
        }
        AnalysisRun run;
        run.run_id = run_id;
        run.evidence_id = item.id;
        run.chunk_ref = unit.ref;
        run.chunk_index = u;
        run.profile_name = profile;
        run.repetition = rep;
        run.template_id = tid;
        run.request_digest = digest;
        run.request = canonical;
        run.started_at = format_iso(actx.clock());
        try {
          const auto resp = actx.gateway->complete(req);
          run.raw_response = resp.raw_text;
          run.verdict = parse_verdict(resp.raw_text);
          run.attempt_count = resp.attempt_count;
          run.latency_ms = resp.latency_ms;
        } catch (const std::exception& e) {
          run.error = e.what();
          if (run.error.empty()) run.error = "model call failed";
          run.verdict = unavailable_verdict(run.error);
        }
        run.finished_at = format_iso(actx.clock());
        if (actx.store) actx.store->save(run);
        if (actx.ledger) actx.ledger->append(CustodyAction::Analyzed, item.id, item.sha256);
        out.push_back(std::move(run));
      }
    }
  }
  return out;
}

}  // namespace scout
