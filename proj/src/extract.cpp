#include "scout/extract.hpp"

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scout/chunking.hpp"
#include "scout/docx.hpp"
#include "scout/mail.hpp"
#include "scout/pcap.hpp"

extern char** environ;

namespace scout {

namespace fs = std::filesystem;

std::string_view to_string(ExtractionStatus s) {
  switch (s) {
    case ExtractionStatus::Ok: return "ok";
    case ExtractionStatus::Failed: return "extraction-failed";
    case ExtractionStatus::UnknownKind: return "unknown-kind";
  }
  return "ok";
}

std::optional<ExtractionStatus> parse_extraction_status(std::string_view s) {
  for (auto v : {ExtractionStatus::Ok, ExtractionStatus::Failed, ExtractionStatus::UnknownKind})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

Modality ExtractionResult::modality() const {
  return kind == EvidenceKind::Image || kind == EvidenceKind::Video ? Modality::Vision : Modality::Text;
}

bool ConverterHook::handles(const fs::path& file) const {
  if (command.empty()) return false;
  const auto ext = to_lower(file.extension().string());
  return std::find(extensions.begin(), extensions.end(), ext) != extensions.end();
}

std::string run_converter(const ConverterHook& hook, const fs::path& file) {
  if (hook.command.empty()) throw Error(ErrorCode::InvalidConfig, "converter command is empty");
  std::vector<std::string> args;
  bool substituted = false;
  for (const auto& a : hook.command) {
    if (a == "{path}") {
      args.push_back(file.string());
      substituted = true;
    } else {
      args.push_back(a);
    }
  }
  if (!substituted) args.push_back(file.string());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int out[2];
  if (pipe2(out, O_CLOEXEC) != 0) throw Error(ErrorCode::IoFailure, "pipe failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out[1], STDOUT_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(out[1]);
  if (rc != 0) {
    close(out[0]);
    throw Error(ErrorCode::IoFailure, "cannot start converter " + args[0]);
  }
  std::string text;
  char buf[65536];
  for (;;) {
    const ssize_t n = read(out[0], buf, sizeof buf);
    if (n > 0) {
      text.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    break;
  }
  close(out[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw Error(ErrorCode::IoFailure, "converter " + args[0] + " failed on " + file.filename().string());
  return sanitize_utf8(text);
}

namespace {

void add_text_units(ExtractionResult& r, const std::vector<TextChunk>& chunks) {
  for (std::size_t i = 0; i < chunks.size(); ++i)
    r.units.push_back({"chunk-" + std::to_string(i), chunks[i].text, {}, chunks[i].first, chunks[i].last});
}

std::string format_seconds(double s) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(s == std::floor(s) ? 0 : 3);
  os << s;
  return os.str();
}

std::string image_mime_caption(const MediaAttachment& a) {
  std::string s = a.mime;
  if (a.width && a.height) s += ", " + std::to_string(*a.width) + "x" + std::to_string(*a.height);
  if (a.downscaled) s += ", downscaled";
  return s;
}

void extract_media(ExtractionResult& r, const fs::path& file, const Bytes& bytes, const ExtractOptions& opts) {
  if (r.kind == EvidenceKind::Image) {
    auto a = prepare_image(ByteView(bytes), opts.image_max_dim);
    a.file_ref = file.string();
    std::string caption = "Image evidence " + r.path + " (" + image_mime_caption(a) + ").";
    r.units.push_back({"image-0", caption, {a}, 0, 0});
    r.extractor = "image";
    return;
  }
  const auto parts = prepare_video(file, opts.video_max_duration_s);
  r.extractor = "video";
  if (parts.size() == 1 && !parts[0].segment_start_s) {
    r.units.push_back({"video-0",
                       "Video evidence " + r.path + ", duration " + format_seconds(parts[0].duration_s.value_or(0)) + " s.",
                       {parts[0]},
                       0,
                       0});
    return;
  }
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    r.units.push_back({"segment-" + std::to_string(i),
                       "Video evidence " + r.path + ", segment " + std::to_string(i + 1) + " of " +
                           std::to_string(parts.size()) + ": analyze only " + format_seconds(*p.segment_start_s) +
                           " s to " + format_seconds(*p.segment_end_s) + " s.",
                       {p},
                       i,
                       i});
  }
}

}  // namespace

ExtractionResult extract_evidence(const fs::path& root, const EvidenceItem& item, const ExtractOptions& opts) {
  ExtractionResult r;
  r.evidence_id = item.id;
  r.path = item.path;
  r.kind = item.kind;
  const fs::path file = root / fs::path(item.path);
  auto fail = [&](std::string reason) {
    r.status = ExtractionStatus::Failed;
    r.units.clear();
    r.failure = reason;
    r.rule_flags.push_back(unprocessable_flag(reason));
    return r;
  };

  if (item.status == ItemStatus::Unreadable) return fail("file was unreadable at registration");
  if (item.status == ItemStatus::Symlink) return fail("symbolic link, target not followed");

  try {
    Bytes bytes = read_file(file);
    if (sha256_hex(ByteView(bytes)) != item.sha256) return fail("content changed since registration");
    const ByteView view(bytes);
    switch (item.kind) {
      case EvidenceKind::Pcap: {
        const auto pcap = parse_pcap(view);
        add_text_units(r, render_packets(pcap, opts.text_budget));
        r.extractor = "pcap";
        break;
      }
      case EvidenceKind::Mbox: {
        const auto msgs = parse_mbox(view);
        add_text_units(r, batch_emails(msgs, opts.text_budget));
        r.extractor = "mbox";
        break;
      }
      case EvidenceKind::Eml: {
        const std::vector<EmailMessage> msgs{parse_eml(view)};
        add_text_units(r, batch_emails(msgs, opts.text_budget));
        r.extractor = "eml";
        break;
      }
      case EvidenceKind::Docx: {
        const auto doc = extract_docx(view);
        add_text_units(r, chunk_lines(render_document(doc), opts.text_budget));
        r.rule_flags = metadata_rule_flags(doc.metadata, opts.rules, opts.analysis_time);
        r.extractor = doc.format_note.empty() ? "docx" : doc.format_note;
        break;
      }
      case EvidenceKind::Html:
        add_text_units(r, chunk_lines(strip_html(as_text(view)), opts.text_budget));
        r.extractor = "html";
        break;
      case EvidenceKind::PlainText:
        add_text_units(r, chunk_lines(sanitize_utf8(as_text(view)), opts.text_budget));
        r.extractor = "text";
        break;
      case EvidenceKind::Audio: {
        bytes.clear();
        const auto t = transcribe_audio(file, opts.asr);
        std::string text = "Audio transcript (" + t.asr_model + (t.language ? ", " + *t.language : "") + "):\n" + t.text;
        if (!text.ends_with('\n')) text += "\n";
        add_text_units(r, chunk_lines(text, opts.text_budget));
        r.extractor = "asr:" + t.asr_model;
        break;
      }
      case EvidenceKind::Image:
      case EvidenceKind::Video:
        extract_media(r, file, bytes, opts);
        break;
      case EvidenceKind::Unknown:
        if (!opts.converter.handles(file)) {
          r.status = ExtractionStatus::UnknownKind;
          r.extractor = "none";
          return r;
        }
        add_text_units(r, chunk_lines(run_converter(opts.converter, file), opts.text_budget));
        r.extractor = "converter:" + fs::path(opts.converter.command.front()).filename().string();
        break;
    }
  } catch (const Error& e) {
    return fail(e.what());
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  return r;
}

nlohmann::ordered_json rule_flag_to_json(const RuleFlag& f) {
  return {{"label", f.label}, {"severity", to_string(f.severity)}, {"rationale", f.rationale}, {"rule_id", f.rule_id}};
}

RuleFlag rule_flag_from_json(const nlohmann::json& j) {
  return {j.at("label").get<std::string>(), parse_severity(j.at("severity").get<std::string>()),
          j.at("rationale").get<std::string>(), j.at("rule_id").get<std::string>()};
}

nlohmann::ordered_json extraction_to_json(const ExtractionResult& r) {
  nlohmann::ordered_json j;
  j["evidence_id"] = r.evidence_id;
  j["path"] = r.path;
  j["kind"] = to_string(r.kind);
  j["status"] = to_string(r.status);
  j["extractor"] = r.extractor;
  j["failure"] = r.failure;
  j["units"] = nlohmann::ordered_json::array();
  for (const auto& u : r.units) j["units"].push_back({{"ref", u.ref}, {"first", u.first}, {"last", u.last}});
  j["rule_flags"] = nlohmann::ordered_json::array();
  for (const auto& f : r.rule_flags) j["rule_flags"].push_back(rule_flag_to_json(f));
  return j;
}

ExtractionResult extraction_from_json(const nlohmann::json& j) {
  ExtractionResult r;
  r.evidence_id = j.at("evidence_id").get<std::string>();
  r.path = j.at("path").get<std::string>();
  const auto kind = parse_evidence_kind(j.at("kind").get<std::string>());
  const auto status = parse_extraction_status(j.at("status").get<std::string>());
  if (!kind || !status) throw Error(ErrorCode::InvalidConfig, "bad extraction record for " + r.path);
  r.kind = *kind;
  r.status = *status;
  r.extractor = j.value("extractor", "");
  r.failure = j.value("failure", "");
  for (const auto& u : j.at("units"))
    r.units.push_back({u.at("ref").get<std::string>(), "", {}, u.value("first", std::size_t{0}), u.value("last", std::size_t{0})});
  for (const auto& f : j.at("rule_flags")) r.rule_flags.push_back(rule_flag_from_json(f));
  return r;
}

}  // namespace scout
