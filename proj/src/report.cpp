#include "scout/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace scout {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string>& report_caveats() {
  static const std::vector<std::string> kCaveats{
      "Files that are not flagged must still be analyzed. Language-model triage has a large possibility of false "
      "negatives, so a low score or a missing flag is no evidence that a file is irrelevant.",
      "Model outputs are not evidence. They can be incorrect or hallucinated, are inadmissible or at best hard to "
      "admit, and every finding requires verification with approved forensic tools before it is relied on.",
      "Model outputs vary between runs and models; scores reflect only the runs recorded for this report.",
      "Items marked extraction-failed or unknown-kind were not seen by any model and need manual examination.",
  };
  return kCaveats;
}

Report build_report(const CaseContext& ctx, const Manifest& manifest, const std::vector<ExtractionResult>& extractions,
                    const std::vector<AnalysisRun>& runs, const CustodyLedger& ledger, UtcTime generated_at) {
  std::map<std::string, const ExtractionResult*> by_path;
  for (const auto& e : extractions) by_path[e.path] = &e;
  std::map<std::string, std::vector<const AnalysisRun*>> runs_by_id;
  for (const auto& r : runs) runs_by_id[r.evidence_id].push_back(&r);

  Report rep;
  rep.generated_at = format_iso(generated_at);
  rep.ledger_head = ledger.head_excluding_reports();
  rep.tool_version = actor_id();
  rep.case_context = ctx;
  rep.caveats = report_caveats();
  rep.corpus_stats.total_items = manifest.items.size();

  std::vector<PriorityEntry> priority;
  std::map<std::string, ReportEntry> details;
  for (const auto& item : manifest.items) {
    ReportEntry e;
    e.evidence_id = item.id;
    e.path = item.path;
    e.kind = std::string(to_string(item.kind));
    e.sha256 = item.sha256;
    e.status = "not-analyzed";
    const ExtractionResult* ex = nullptr;
    if (auto it = by_path.find(item.path); it != by_path.end() && it->second->evidence_id == item.id) ex = it->second;
    std::vector<AnalysisRun> mine;
    if (ex) {
      e.status = std::string(to_string(ex->status));
      e.rule_flags = ex->rule_flags;
      std::set<std::string> refs;
      for (const auto& u : ex->units) refs.insert(u.ref);
      if (auto it = runs_by_id.find(item.id); it != runs_by_id.end())
        for (const auto* r : it->second)
          if (refs.count(r->chunk_ref)) mine.push_back(*r);
      std::sort(mine.begin(), mine.end(), [](const AnalysisRun& a, const AnalysisRun& b) {
        return std::tie(a.chunk_index, a.profile_name, a.repetition, a.run_id) <
               std::tie(b.chunk_index, b.profile_name, b.repetition, b.run_id);
      });
      if (ex->status == ExtractionStatus::Failed) ++rep.corpus_stats.extraction_failed;
      if (ex->status == ExtractionStatus::UnknownKind) ++rep.corpus_stats.unknown_kind;
      if (ex->status == ExtractionStatus::Ok && !mine.empty()) ++rep.corpus_stats.analyzed;
    }
    for (const auto& r : mine) {
      e.contributing_runs.push_back(r.run_id);
      e.runs.push_back({r.run_id, r.profile_name, r.chunk_ref, r.verdict.relevance,
                        std::string(to_string(r.verdict.parse_status)), r.verdict.summary, r.verdict.flags});
    }
    e.score = score_evidence(mine, e.rule_flags);
    priority.push_back({e.evidence_id, e.path, e.score, 0, e.contributing_runs, e.rule_flags});
    details[e.path] = std::move(e);
  }
  for (const auto& p : rank_corpus(std::move(priority))) {
    auto e = std::move(details[p.path]);
    e.rank = p.rank;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

namespace {

ordered_json flag_json(const VerdictFlag& f) {
  return {{"label", f.label}, {"severity", to_string(f.severity)}, {"rationale", f.rationale}};
}

ordered_json entry_json(const ReportEntry& e) {
  ordered_json j;
  j["rank"] = e.rank;
  j["score"] = e.score;
  j["evidence_id"] = e.evidence_id;
  j["path"] = e.path;
  j["kind"] = e.kind;
  j["sha256"] = e.sha256;
  j["status"] = e.status;
  j["rule_flags"] = ordered_json::array();
  for (const auto& f : e.rule_flags) j["rule_flags"].push_back(rule_flag_to_json(f));
  j["contributing_runs"] = e.contributing_runs;
  j["runs"] = ordered_json::array();
  for (const auto& r : e.runs) {
    ordered_json rj;
    rj["run_id"] = r.run_id;
    rj["profile"] = r.profile;
    rj["chunk_ref"] = r.chunk_ref;
    rj["relevance"] = r.relevance;
    rj["parse_status"] = r.parse_status;
    rj["summary"] = r.summary;
    rj["flags"] = ordered_json::array();
    for (const auto& f : r.flags) rj["flags"].push_back(flag_json(f));
    j["runs"].push_back(std::move(rj));
  }
  return j;
}

std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", s);
  return buf;
}

std::string cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out;
}

std::string one_line(std::string_view s) {
  std::string out;
  for (char c : s) out += (c == '\n' || c == '\r') ? ' ' : c;
  return out;
}

}  // namespace

std::string render_json(const Report& r) {
  ordered_json j;
  j["generation"] = {{"generated_at", r.generated_at}, {"ledger_head", r.ledger_head}};
  j["tool_version"] = r.tool_version;
  j["case"] = case_to_json(r.case_context);
  j["corpus_stats"] = {{"total_items", r.corpus_stats.total_items},
                       {"analyzed", r.corpus_stats.analyzed},
                       {"extraction_failed", r.corpus_stats.extraction_failed},
                       {"unknown_kind", r.corpus_stats.unknown_kind}};
  j["entries"] = ordered_json::array();
  for (const auto& e : r.entries) j["entries"].push_back(entry_json(e));
  j["caveats"] = r.caveats;
  return j.dump(2) + "\n";
}

Report report_from_json(std::string_view text) {
  const auto j = json::parse(text);
  Report r;
  r.generated_at = j.at("generation").at("generated_at").get<std::string>();
  r.ledger_head = j.at("generation").at("ledger_head").get<std::string>();
  r.tool_version = j.at("tool_version").get<std::string>();
  r.case_context = case_from_json(j.at("case"));
  const auto& s = j.at("corpus_stats");
  r.corpus_stats = {s.at("total_items").get<std::size_t>(), s.at("analyzed").get<std::size_t>(),
                    s.at("extraction_failed").get<std::size_t>(), s.at("unknown_kind").get<std::size_t>()};
  for (const auto& ej : j.at("entries")) {
    ReportEntry e;
    e.rank = ej.at("rank").get<int>();
    e.score = ej.at("score").get<double>();
    e.evidence_id = ej.at("evidence_id").get<std::string>();
    e.path = ej.at("path").get<std::string>();
    e.kind = ej.at("kind").get<std::string>();
    e.sha256 = ej.at("sha256").get<std::string>();
    e.status = ej.at("status").get<std::string>();
    for (const auto& f : ej.at("rule_flags")) e.rule_flags.push_back(rule_flag_from_json(f));
    e.contributing_runs = ej.at("contributing_runs").get<std::vector<std::string>>();
    for (const auto& rj : ej.at("runs")) {
      RunSummary rs;
      rs.run_id = rj.at("run_id").get<std::string>();
      rs.profile = rj.at("profile").get<std::string>();
      rs.chunk_ref = rj.at("chunk_ref").get<std::string>();
      rs.relevance = rj.at("relevance").get<int>();
      rs.parse_status = rj.at("parse_status").get<std::string>();
      rs.summary = rj.at("summary").get<std::string>();
      for (const auto& f : rj.at("flags"))
        rs.flags.push_back({f.at("label").get<std::string>(), parse_severity(f.at("severity").get<std::string>()),
                            f.at("rationale").get<std::string>()});
      e.runs.push_back(std::move(rs));
    }
    r.entries.push_back(std::move(e));
  }
  r.caveats = j.at("caveats").get<std::vector<std::string>>();
  return r;
}

std::vector<std::string> top_flags(const ReportEntry& e, std::size_t limit) {
  std::vector<std::pair<Severity, std::string>> all;
  for (const auto& f : e.rule_flags) all.emplace_back(f.severity, f.label);
  for (const auto& r : e.runs)
    for (const auto& f : r.flags) all.emplace_back(f.severity, f.label);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& [sev, label] : all) {
    if (out.size() >= limit) break;
    if (!seen.insert(label).second) continue;
    out.push_back(label + " (" + std::string(to_string(sev)) + ")");
  }
  return out;
}

std::string render_markdown(const Report& r) {
  std::string s = "# Triage report: " + one_line(r.case_context.case_id) + "\n\n";
  s += "- Generated: " + r.generated_at + "\n";
  s += "- Ledger head: `" + r.ledger_head + "`\n";
  s += "- Tool: " + r.tool_version + "\n";
  s += "- Background: " + (r.case_context.background.empty() ? "(none)" : one_line(r.case_context.background)) + "\n";
  std::string kws;
  for (const auto& k : r.case_context.keywords) kws += (kws.empty() ? "" : ", ") + k;
  s += "- Keywords: " + (kws.empty() ? "(none)" : kws) + "\n";
  if (!r.case_context.extra_instructions.empty())
    s += "- Extra instructions: " + one_line(r.case_context.extra_instructions) + "\n";
  const auto& cs = r.corpus_stats;
  s += "- Items: " + std::to_string(cs.total_items) + " total, " + std::to_string(cs.analyzed) + " analyzed, " +
       std::to_string(cs.extraction_failed) + " extraction failed, " + std::to_string(cs.unknown_kind) +
       " unknown kind\n\n";

  s += "## Ranking\n\n";
  s += "| Rank | Score | Path | Kind | Top flags |\n";
  s += "|---:|---:|---|---|---|\n";
  for (const auto& e : r.entries) {
    std::string flags;
    for (const auto& f : top_flags(e)) flags += (flags.empty() ? "" : ", ") + f;
    s += "| " + std::to_string(e.rank) + " | " + format_score(e.score) + " | " + cell(e.path) + " | " + e.kind + " | " +
         cell(flags) + " |\n";
  }
  s += "\n## Items\n";
  for (const auto& e : r.entries) {
    s += "\n### " + std::to_string(e.rank) + ". " + one_line(e.path) + "\n\n";
    s += "- Evidence id: `" + e.evidence_id + "`\n";
    s += "- SHA-256: `" + e.sha256 + "`\n";
    s += "- Kind: " + e.kind + ", status: " + e.status + ", score: " + format_score(e.score) + "\n";
    if (!e.rule_flags.empty()) {
      s += "- Rule flags:\n";
      for (const auto& f : e.rule_flags)
        s += "  - " + f.label + " (" + std::string(to_string(f.severity)) + ", " + f.rule_id + "): " +
             one_line(f.rationale) + "\n";
    }
    if (e.runs.empty()) {
      s += "- Runs: none\n";
      continue;
    }
    s += "- Runs:\n";
    for (const auto& run : e.runs) {
      s += "  - `" + run.run_id + "` " + run.profile + " " + run.chunk_ref + ", relevance " +
           std::to_string(run.relevance) + " (" + run.parse_status + "): " + one_line(run.summary) + "\n";
      for (const auto& f : run.flags)
        s += "    - " + f.label + " (" + std::string(to_string(f.severity)) + "): " + one_line(f.rationale) + "\n";
    }
  }
  s += "\n## Caveats\n\n";
  for (const auto& c : r.caveats) s += "- " + c + "\n";
  return s;
}

}  // namespace scout
