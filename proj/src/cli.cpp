#include "scout/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "scout/chunking.hpp"
#include "scout/config.hpp"
#include "scout/custody.hpp"
#include "scout/evidence.hpp"
#include "scout/extract.hpp"
#include "scout/gateway.hpp"
#include "scout/report.hpp"
#include "scout/triage.hpp"

namespace scout {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_workspace(const std::string& flag) {
  if (!flag.empty()) return fs::absolute(flag);
  if (const char* env = std::getenv("SCOUT_WORKSPACE"); env && *env) return fs::absolute(env);
  throw UsageError("no workspace: pass --workspace or set SCOUT_WORKSPACE");
}

void refuse_inside(const fs::path& workspace, const fs::path& evidence_root) {
  if (path_within(workspace, evidence_root))
    throw UsageError("workspace " + workspace.string() + " lies inside the evidence root " + evidence_root.string());
}

Manifest load_manifest(const WorkspaceLayout& ws) {
  if (!fs::exists(ws.manifest())) throw UsageError("no manifest in " + ws.dir.string() + "; run scan first");
  return manifest_from_json(read_text_file(ws.manifest()));
}

Config load_workspace_config(const WorkspaceLayout& ws) {
  return fs::exists(ws.config()) ? load_config(ws.config()) : default_config();
}

std::string extraction_file_name(const std::string& path) { return sha256_hex(path).substr(0, 16) + ".json"; }

std::vector<ExtractionResult> load_extractions(const WorkspaceLayout& ws) {
  std::vector<ExtractionResult> out;
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(ws.extractions(), ec))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto j = nlohmann::json::parse(read_text_file(f), nullptr, false);
    if (j.is_discarded()) continue;
    try {
      out.push_back(extraction_from_json(j));
    } catch (const std::exception&) {
    }
  }
  return out;
}

std::optional<ExtractionResult> load_extraction(const WorkspaceLayout& ws, const EvidenceItem& item) {
  const auto p = ws.extractions() / extraction_file_name(item.path);
  if (!fs::exists(p)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_text_file(p), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  try {
    auto r = extraction_from_json(j);
    if (r.evidence_id != item.id || r.path != item.path) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---- scan ------------------------------------------------------------------

int cmd_scan(const std::string& root_arg, const std::string& ws_arg, const std::string& case_arg,
             const std::string& config_arg, std::ostream& out) {
  const WorkspaceLayout ws{resolve_workspace(ws_arg)};
  const fs::path root = fs::absolute(root_arg);
  if (!fs::is_directory(root)) throw Error(ErrorCode::RootNotFound, "evidence root not found: " + root.string());
  refuse_inside(ws.dir, root);
  const auto case_file = load_case_file(case_arg);
  std::optional<Config> config;
  if (!config_arg.empty()) config = load_config(config_arg);

  fs::create_directories(ws.dir);
  write_file_atomic(ws.case_file(), case_file_to_json(case_file).dump(2) + "\n");
  if (config) write_file_atomic(ws.config(), config_to_json(*config).dump(2) + "\n");
  else if (!fs::exists(ws.config())) write_file_atomic(ws.config(), config_to_json(default_config()).dump(2) + "\n");

  CustodyLedger ledger(ws.ledger());
  WalkOptions opts;
  opts.case_ref = case_file.context.case_id;
  const auto manifest = walk_evidence(root, ledger, opts);
  write_file_atomic(ws.manifest(), manifest_to_json(manifest));
  out << "registered " << manifest.items.size() << " item(s) from " << root.string() << "\n";
  return exit_code::kOk;
}

// ---- analyze ---------------------------------------------------------------

int cmd_analyze(const std::string& ws_arg, int runs_flag, const std::vector<std::string>& models_flag,
                std::ostream& out, std::ostream& err) {
  const WorkspaceLayout ws{resolve_workspace(ws_arg)};
  const auto manifest = load_manifest(ws);
  const fs::path root = manifest.evidence_root;
  refuse_inside(ws.dir, root);
  const auto config = load_workspace_config(ws);
  const auto case_file = load_case_file(ws.case_file());
  const auto& ctx = case_file.context;
  const int runs = runs_flag > 0 ? runs_flag : case_file.runs_per_chunk.value_or(config.runs_per_chunk);

  std::map<EvidenceKind, std::vector<std::string>> profiles;
  std::map<EvidenceKind, std::optional<std::size_t>> budgets;
  for (const auto& item : manifest.items) {
    if (profiles.count(item.kind)) continue;
    profiles[item.kind] = profiles_for(item.kind, config, case_file, models_flag);
  }

  Gateway gateway(config.profiles, gateway_options(config));
  RunStore store(ws.runs());
  fs::create_directories(ws.extractions());
  CustodyLedger ledger(ws.ledger());
  const UtcTime analysis_time = utc_now();

  for (const auto& [kind, names] : profiles) {
    if (kind == EvidenceKind::Image || kind == EvidenceKind::Video) continue;
    std::optional<std::size_t> budget;
    try {
      for (const auto& n : names) {
        const auto b = usable_budget(gateway.profile(n), template_tokens(kind, ctx));
        budget = budget ? std::min(*budget, b) : b;
      }
    } catch (const Error& e) {
      err << "warning: " << to_string(kind) << ": " << e.what() << "\n";
      budget = 0;
    }
    budgets[kind] = budget;
  }

  std::atomic<std::size_t> next{0}, skipped{0}, fresh_runs{0}, unavailable{0}, failed{0};
  std::mutex err_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < manifest.items.size(); i = next++) {
      const auto& item = manifest.items[i];
      const auto& names = profiles.at(item.kind);
      if (auto prior = load_extraction(ws, item)) {
        bool complete = true;
        if (prior->status == ExtractionStatus::Ok) {
          for (const auto& u : prior->units)
            for (const auto& p : names)
              for (int rep = 0; rep < runs && complete; ++rep) {
                const auto r = store.load(make_run_id(item.id, item.kind, p, u.ref, rep));
                complete = r && !r->model_unavailable();
              }
        }
        if (complete) {
          ++skipped;
          continue;
        }
      }
      ExtractOptions eo;
      eo.image_max_dim = config.media.image_max_dim;
      eo.video_max_duration_s = config.media.video_max_duration_s;
      eo.asr = config.asr;
      eo.converter = config.converter;
      eo.rules = config.rules;
      eo.analysis_time = analysis_time;
      ExtractionResult ex;
      const auto budget = budgets.count(item.kind) ? budgets.at(item.kind) : std::nullopt;
      if (budget && *budget == 0) {
        ex.evidence_id = item.id;
        ex.path = item.path;
        ex.kind = item.kind;
        ex.status = ExtractionStatus::Failed;
        ex.failure = "prompt template exceeds the model context window";
        ex.rule_flags.push_back(unprocessable_flag(ex.failure));
      } else {
        if (budget) eo.text_budget = *budget;
        ex = extract_evidence(root, item, eo);
      }
      ledger.append(CustodyAction::Extracted, item.id, item.sha256);
      write_file_atomic(ws.extractions() / extraction_file_name(item.path), extraction_to_json(ex).dump(2) + "\n");
      if (ex.status == ExtractionStatus::Failed) ++failed;
      if (ex.status != ExtractionStatus::Ok) continue;
      if (names.empty() && !ex.units.empty()) {
        std::lock_guard lock(err_mu);
        err << "warning: no model profile for " << to_string(item.kind) << " (" << item.path << ")\n";
        continue;
      }
      AnalyzeContext actx{&gateway, &store, &ledger, system_clock_source()};
      for (const auto& run : analyze_evidence(item, ex, ctx, names, runs, actx)) {
        if (run.model_unavailable()) ++unavailable;
        ++fresh_runs;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int n = std::max(1, std::min<int>(config.workers, static_cast<int>(manifest.items.size())));
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
  }
  out << "analyzed " << manifest.items.size() - skipped << " item(s), skipped " << skipped << " complete, "
      << fresh_runs << " run(s) recorded, " << failed << " extraction failure(s)\n";
  if (unavailable > 0) err << "warning: " << unavailable << " run(s) could not reach a model endpoint\n";
  return exit_code::kOk;
}

// ---- report ----------------------------------------------------------------

int cmd_report(const std::string& ws_arg, const std::string& format, std::ostream& out) {
  const WorkspaceLayout ws{resolve_workspace(ws_arg)};
  const auto manifest = load_manifest(ws);
  refuse_inside(ws.dir, manifest.evidence_root);
  const auto case_file = load_case_file(ws.case_file());
  CustodyLedger ledger(ws.ledger());
  const RunStore store(ws.runs());
  const auto report =
      build_report(case_file.context, manifest, load_extractions(ws), store.load_all(), ledger, utc_now());
  std::string digest_source;
  if (format == "json" || format == "both") {
    const auto text = render_json(report);
    write_file_atomic(ws.report_json(), text);
    digest_source += text;
    out << ws.report_json().string() << "\n";
  }
  if (format == "md" || format == "both") {
    const auto text = render_markdown(report);
    write_file_atomic(ws.report_md(), text);
    digest_source += text;
    out << ws.report_md().string() << "\n";
  }
  ledger.append(CustodyAction::Reported, "*", sha256_hex(digest_source));
  return exit_code::kOk;
}

// ---- verify ----------------------------------------------------------------

int cmd_verify(const std::string& ws_arg, std::ostream& out) {
  const WorkspaceLayout ws{resolve_workspace(ws_arg)};
  const auto manifest = load_manifest(ws);
  const auto outcome = ledger_verify_file(ws.ledger());
  bool ok = outcome.ok;
  if (ok) {
    out << "ledger: ok\n";
  } else {
    out << "ledger: broken at record " << outcome.broken_seq << " (" << to_string(outcome.reason) << ")";
    if (!outcome.detail.empty()) out << ": " << outcome.detail;
    out << "\n";
  }
  std::optional<CustodyLedger> disk;
  CustodyLedger scratch;
  if (ok) disk.emplace(ws.ledger());
  const auto mismatches = verify_untouched(manifest, disk ? *disk : scratch);
  for (const auto& m : mismatches)
    out << "MISMATCH " << m.path << " expected " << m.expected_sha256 << " actual "
        << (m.actual_sha256 ? *m.actual_sha256 : std::string("missing-or-unreadable")) << "\n";
  if (mismatches.empty()) out << "evidence: " << manifest.items.size() << " item(s) untouched\n";
  ok = ok && mismatches.empty();
  return ok ? exit_code::kOk : exit_code::kVerification;
}

// ---- models ping -----------------------------------------------------------

int cmd_ping(const std::string& ws_arg, const std::vector<std::string>& models_flag, std::ostream& out) {
  const WorkspaceLayout ws{resolve_workspace(ws_arg)};
  auto config = load_workspace_config(ws);
  std::vector<ModelProfile> selected;
  for (auto p : config.profiles) {
    if (!models_flag.empty() && std::find(models_flag.begin(), models_flag.end(), p.name) == models_flag.end()) continue;
    p.max_retries = 0;
    selected.push_back(std::move(p));
  }
  for (const auto& n : models_flag)
    if (std::none_of(selected.begin(), selected.end(), [&](const auto& p) { return p.name == n; }))
      throw UsageError("unknown model profile: " + n);
  if (selected.empty()) throw UsageError("no model profiles configured");
  Gateway gateway(selected, gateway_options(config));
  bool all_ok = true;
  for (const auto& p : selected) {
    ChatRequest req{p.name,
                    {{Role::System, "Connectivity check. Reply with the single word pong.", {}},
                     {Role::User, "ping", {}}}};
    try {
      const auto resp = gateway.complete(req);
      out << "ok   " << p.name << " " << resp.latency_ms << " ms\n";
    } catch (const std::exception& e) {
      all_ok = false;
      out << "FAIL " << p.name << ": " << e.what() << "\n";
    }
  }
  return all_ok ? exit_code::kOk : exit_code::kEnvironment;
}

int code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Usage:
    case ErrorCode::InvalidConfig: return exit_code::kUsage;
    case ErrorCode::LedgerCorrupt: return exit_code::kVerification;
    default: return exit_code::kEnvironment;
  }
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Read-only evidence triage with local language models", "scout"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string workspace, root, case_path, config_path, format = "both";
  int runs = 0;
  std::vector<std::string> models;

  auto* scan = app.add_subcommand("scan", "Walk and hash the evidence tree, record custody");
  scan->add_option("evidence_root", root, "Evidence directory (opened read-only)")->required();
  scan->add_option("--workspace,-w", workspace, "Workspace directory (default $SCOUT_WORKSPACE)");
  scan->add_option("--case,-c", case_path, "Case file (JSON)")->required();
  scan->add_option("--config", config_path, "Config file copied into the workspace");

  auto* analyze = app.add_subcommand("analyze", "Extract every item and query the configured models");
  analyze->add_option("--workspace,-w", workspace, "Workspace directory (default $SCOUT_WORKSPACE)");
  analyze->add_option("--runs,-n", runs, "Runs per chunk and profile")->check(CLI::PositiveNumber);
  analyze->add_option("--models,-m", models, "Profile names, comma separated")->delimiter(',');

  auto* report = app.add_subcommand("report", "Write the ranked triage report");
  report->add_option("--workspace,-w", workspace, "Workspace directory (default $SCOUT_WORKSPACE)");
  report->add_option("--format,-f", format, "json, md or both")->check(CLI::IsMember({"json", "md", "both"}));

  auto* verify = app.add_subcommand("verify", "Check the custody ledger and evidence hashes");
  verify->add_option("--workspace,-w", workspace, "Workspace directory (default $SCOUT_WORKSPACE)");

  auto* models_cmd = app.add_subcommand("models", "Model endpoint utilities");
  models_cmd->require_subcommand(1);
  auto* ping = models_cmd->add_subcommand("ping", "Send one trivial request per profile");
  ping->add_option("--workspace,-w", workspace, "Workspace directory (default $SCOUT_WORKSPACE)");
  ping->add_option("--models,-m", models, "Profile names, comma separated")->delimiter(',');

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("scout");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  try {
    if (*scan) return cmd_scan(root, workspace, case_path, config_path, out);
    if (*analyze) return cmd_analyze(workspace, runs, models, out, err);
    if (*report) return cmd_report(workspace, format, out);
    if (*verify) return cmd_verify(workspace, out);
    if (*ping) return cmd_ping(workspace, models, out);
  } catch (const UsageError& e) {
    err << "scout: " << e.what() << "\n";
    return exit_code::kUsage;
  } catch (const Error& e) {
    err << "scout: " << to_string(e.code()) << ": " << e.what() << "\n";
    return code_for(e.code());
  } catch (const std::exception& e) {
    err << "scout: " << e.what() << "\n";
    return exit_code::kEnvironment;
  }
  return exit_code::kUsage;
}

}  // namespace scout
