#include "scout/custody.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace scout {

using ojson = nlohmann::ordered_json;

std::string_view to_string(CustodyAction a) {
  switch (a) {
    case CustodyAction::Registered: return "Registered";
    case CustodyAction::Extracted: return "Extracted";
    case CustodyAction::Analyzed: return "Analyzed";
    case CustodyAction::Reported: return "Reported";
    case CustodyAction::Verified: return "Verified";
  }
  return "Registered";
}

std::optional<CustodyAction> parse_custody_action(std::string_view s) {
  for (auto a : {CustodyAction::Registered, CustodyAction::Extracted, CustodyAction::Analyzed,
                 CustodyAction::Reported, CustodyAction::Verified})
    if (to_string(a) == s) return a;
  return std::nullopt;
}

std::string_view to_string(BreakReason r) {
  switch (r) {
    case BreakReason::ParseError: return "parse-error";
    case BreakReason::NonCanonical: return "non-canonical";
    case BreakReason::SeqGap: return "seq-gap";
    case BreakReason::LinkMismatch: return "link-mismatch";
    case BreakReason::HashMismatch: return "hash-mismatch";
    case BreakReason::Incomplete: return "incomplete";
  }
  return "parse-error";
}

std::string serialize_record(const CustodyRecord& r, bool blank_hash) {
  ojson j;
  j["seq"] = r.seq;
  j["timestamp"] = r.timestamp;
  j["actor"] = r.actor;
  j["action"] = std::string(to_string(r.action));
  j["evidence_id"] = r.evidence_id;
  j["evidence_sha256"] = r.evidence_sha256;
  j["prev_record_hash"] = r.prev_record_hash;
  j["record_hash"] = blank_hash ? std::string() : r.record_hash;
  return j.dump();
}

std::string compute_record_hash(const CustodyRecord& r) { return sha256_hex(serialize_record(r, true)); }

namespace {

std::optional<CustodyRecord> parse_line(std::string_view line) {
  const auto j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.size() != 8) return std::nullopt;
  try {
    CustodyRecord r;
    if (!j.at("seq").is_number_unsigned()) return std::nullopt;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.actor = j.at("actor").get<std::string>();
    auto action = parse_custody_action(j.at("action").get<std::string>());
    if (!action) return std::nullopt;
    r.action = *action;
    r.evidence_id = j.at("evidence_id").get<std::string>();
    r.evidence_sha256 = j.at("evidence_sha256").get<std::string>();
    r.prev_record_hash = j.at("prev_record_hash").get<std::string>();
    r.record_hash = j.at("record_hash").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

// Shared walk for verify and parse; stops at the first breakage.
VerifyOutcome walk_chain(std::string_view content, std::vector<CustodyRecord>* out) {
  std::uint64_t expected_seq = 0;
  std::string prev(kGenesisHash);
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos)
      return VerifyOutcome::broken_at(expected_seq, BreakReason::Incomplete, "record not LF-terminated");
    const auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    auto rec = parse_line(line);
    if (!rec) return VerifyOutcome::broken_at(expected_seq, BreakReason::ParseError);
    if (serialize_record(*rec) != line) return VerifyOutcome::broken_at(expected_seq, BreakReason::NonCanonical);
    if (rec->seq != expected_seq)
      return VerifyOutcome::broken_at(expected_seq, BreakReason::SeqGap,
                                      "found seq " + std::to_string(rec->seq));
    if (rec->prev_record_hash != prev) return VerifyOutcome::broken_at(expected_seq, BreakReason::LinkMismatch);
    if (!is_sha256_hex(rec->record_hash) || compute_record_hash(*rec) != rec->record_hash)
      return VerifyOutcome::broken_at(expected_seq, BreakReason::HashMismatch);
    prev = rec->record_hash;
    ++expected_seq;
    if (out) out->push_back(std::move(*rec));
  }
  return VerifyOutcome::good();
}

}  // namespace

VerifyOutcome ledger_verify(std::string_view content) { return walk_chain(content, nullptr); }

VerifyOutcome ledger_verify_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return VerifyOutcome::good();
  return ledger_verify(read_text_file(path));
}

std::vector<CustodyRecord> parse_ledger(std::string_view content) {
  std::vector<CustodyRecord> out;
  const auto outcome = walk_chain(content, &out);
  if (!outcome.ok)
    throw Error(ErrorCode::LedgerCorrupt, "chain broken at seq " + std::to_string(outcome.broken_seq) + " (" +
                                              std::string(to_string(outcome.reason)) + ")");
  return out;
}

CustodyLedger::CustodyLedger(std::filesystem::path path, Clock clock)
    : path_(std::move(path)), clock_(std::move(clock)) {
  if (!path_.empty() && std::filesystem::exists(path_)) records_ = parse_ledger(read_text_file(path_));
}

CustodyRecord CustodyLedger::append(CustodyAction action, std::string_view evidence_id,
                                    std::string_view evidence_sha256, std::string_view actor) {
  std::lock_guard lock(mu_);
  CustodyRecord r;
  r.seq = records_.size();
  r.timestamp = format_iso(clock_());
  r.actor = actor.empty() ? actor_id() : std::string(actor);
  r.action = action;
  r.evidence_id = std::string(evidence_id);
  r.evidence_sha256 = std::string(evidence_sha256);
  r.prev_record_hash = records_.empty() ? std::string(kGenesisHash) : records_.back().record_hash;
  r.record_hash = compute_record_hash(r);
  const std::string line = serialize_record(r) + "\n";

  if (path_.empty()) {
    memory_content_ += line;
  } else {
    const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, "open ledger: " + std::string(std::strerror(errno)));
    const off_t before = ::lseek(fd, 0, SEEK_END);
    // One write per record; a short write is rolled back so the file never keeps a partial line.
    const ssize_t n = ::write(fd, line.data(), line.size());
    if (n != static_cast<ssize_t>(line.size())) {
      const int err = errno;
      if (before >= 0 && ::ftruncate(fd, before) != 0) { /* best effort */ }
      ::close(fd);
      throw Error(ErrorCode::IoFailure, "append ledger: " + std::string(std::strerror(err)));
    }
    ::fsync(fd);
    ::close(fd);
  }
  records_.push_back(r);
  return r;
}

std::vector<CustodyRecord> CustodyLedger::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t CustodyLedger::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::string CustodyLedger::head() const {
  std::lock_guard lock(mu_);
  return records_.empty() ? std::string(kGenesisHash) : records_.back().record_hash;
}

std::string CustodyLedger::head_excluding_reports() const {
  std::lock_guard lock(mu_);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it)
    if (it->action != CustodyAction::Reported) return it->record_hash;
  return std::string(kGenesisHash);
}

std::string CustodyLedger::content() const {
  std::lock_guard lock(mu_);
  if (path_.empty()) return memory_content_;
  return std::filesystem::exists(path_) ? read_text_file(path_) : std::string();
}

}  // namespace scout
