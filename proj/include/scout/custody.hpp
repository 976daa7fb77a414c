#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scout/common.hpp"

namespace scout {

enum class CustodyAction { Registered, Extracted, Analyzed, Reported, Verified };

std::string_view to_string(CustodyAction a);
std::optional<CustodyAction> parse_custody_action(std::string_view s);

inline constexpr std::string_view kGenesisHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

/// One hash-chained entry. `evidence_id` is "*" and `evidence_sha256` is "-"
/// for whole-corpus actions.
struct CustodyRecord {
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string actor;
  CustodyAction action = CustodyAction::Registered;
  std::string evidence_id;
  std::string evidence_sha256;
  std::string prev_record_hash;
  std::string record_hash;

  bool operator==(const CustodyRecord&) const = default;
};

/// Single-line JSON with fields in the fixed ledger order. With `blank_hash`
/// the record_hash field is serialized as "" (the hashed form).
std::string serialize_record(const CustodyRecord& r, bool blank_hash = false);
std::string compute_record_hash(const CustodyRecord& r);

enum class BreakReason { ParseError, NonCanonical, SeqGap, LinkMismatch, HashMismatch, Incomplete };
std::string_view to_string(BreakReason r);

struct VerifyOutcome {
  bool ok = true;
  std::uint64_t broken_seq = 0;
  BreakReason reason = BreakReason::ParseError;
  std::string detail;

  static VerifyOutcome good() { return {}; }
  static VerifyOutcome broken_at(std::uint64_t seq, BreakReason why, std::string detail = {}) {
    return {false, seq, why, std::move(detail)};
  }
};

/// Verifies raw ledger file content. Every record must occupy exactly one
/// LF-terminated line in canonical form.
VerifyOutcome ledger_verify(std::string_view content);
VerifyOutcome ledger_verify_file(const std::filesystem::path& path);

/// Append-only custody ledger with a single-writer contract: appends from
/// any thread are serialized through one mutex and one O_APPEND descriptor.
/// An empty path keeps the ledger in memory only.
class CustodyLedger {
 public:
  explicit CustodyLedger(std::filesystem::path path = {}, Clock clock = system_clock_source());

  CustodyRecord append(CustodyAction action, std::string_view evidence_id,
                       std::string_view evidence_sha256, std::string_view actor = {});

  std::vector<CustodyRecord> records() const;
  std::size_t size() const;
  /// record_hash of the newest record, or the genesis hash when empty.
  std::string head() const;
  /// record_hash of the newest record whose action is not Reported.
  std::string head_excluding_reports() const;
  std::string content() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  Clock clock_;
  mutable std::mutex mu_;
  std::vector<CustodyRecord> records_;
  std::string memory_content_;
};

/// Parses a verified ledger. Throws Error(LedgerCorrupt) if the chain is broken.
std::vector<CustodyRecord> parse_ledger(std::string_view content);

}  // namespace scout
