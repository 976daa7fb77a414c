#include <gtest/gtest.h>

#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "scout/custody.hpp"
#include "support.hpp"

using namespace scout;
namespace st = scout::testing;
namespace fs = std::filesystem;

namespace {
Clock fixed_clock() {
  return [] { return *parse_iso("2025-01-01T00:00:00Z"); };
}
}  // namespace

TEST(Custody, ChainLinksAndVerifies) {
  CustodyLedger ledger({}, fixed_clock());
  for (int i = 0; i < 10; ++i) ledger.append(CustodyAction::Registered, "id" + std::to_string(i), std::string(64, 'a'));
  const auto recs = ledger.records();
  ASSERT_EQ(recs.size(), 10u);
  EXPECT_EQ(recs[0].prev_record_hash, kGenesisHash);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].seq, i);
    EXPECT_EQ(recs[i].prev_record_hash, recs[i - 1].record_hash);
  }
  EXPECT_TRUE(ledger_verify(ledger.content()).ok);
  EXPECT_EQ(ledger.head(), recs.back().record_hash);
}

TEST(Custody, RecordHashIsShaOfBlankedSerialization) {
  CustodyLedger ledger({}, fixed_clock());
  const auto r = ledger.append(CustodyAction::Verified, "*", "-");
  // Independent recomputation: blank the hash field of the stored line and hash it.
  auto line = ledger.content();
  line.pop_back();
  auto j = nlohmann::ordered_json::parse(line);
  j["record_hash"] = "";
  EXPECT_EQ(serialize_record(r, true), j.dump());
  EXPECT_EQ(r.record_hash, st::oracle_sha256(j.dump()));
}

TEST(Custody, DetectsDeletedRecord) {
  CustodyLedger ledger({}, fixed_clock());
  for (int i = 0; i < 5; ++i) ledger.append(CustodyAction::Analyzed, "x", "-");
  auto content = ledger.content();
  const auto a = content.find('\n') + 1;
  const auto b = content.find('\n', a) + 1;
  content.erase(a, b - a);
  const auto v = ledger_verify(content);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.broken_seq, 1u);
}

TEST(Custody, DetectsMissingTrailingNewline) {
  CustodyLedger ledger({}, fixed_clock());
  ledger.append(CustodyAction::Registered, "x", "-");
  auto content = ledger.content();
  content.pop_back();
  EXPECT_FALSE(ledger_verify(content).ok);
}

TEST(Custody, EmptyLedgerVerifies) { EXPECT_TRUE(ledger_verify("").ok); }

TEST(Custody, FileBackedReopenContinuesChain) {
  st::TempDir dir;
  {
    CustodyLedger l(dir / "ledger.jsonl", fixed_clock());
    l.append(CustodyAction::Registered, "a", "-");
  }
  CustodyLedger l(dir / "ledger.jsonl", fixed_clock());
  EXPECT_EQ(l.size(), 1u);
  l.append(CustodyAction::Extracted, "a", "-");
  EXPECT_TRUE(ledger_verify_file(dir / "ledger.jsonl").ok);
  EXPECT_EQ(parse_ledger(st::read_bytes(dir / "ledger.jsonl")).size(), 2u);
}

TEST(Custody, ConcurrentAppendsStayChained) {
  st::TempDir dir;
  CustodyLedger l(dir / "ledger.jsonl");
  std::vector<std::jthread> ts;
  for (int t = 0; t < 8; ++t)
    ts.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) l.append(CustodyAction::Analyzed, "t" + std::to_string(t), "-");
    });
  ts.clear();
  EXPECT_EQ(l.size(), 400u);
  EXPECT_TRUE(ledger_verify_file(dir / "ledger.jsonl").ok);
}

TEST(Custody, HeadExcludingReports) {
  CustodyLedger l({}, fixed_clock());
  const auto a = l.append(CustodyAction::Analyzed, "x", "-");
  l.append(CustodyAction::Reported, "*", "abc");
  EXPECT_EQ(l.head_excluding_reports(), a.record_hash);
  EXPECT_NE(l.head(), a.record_hash);
}

TEST(Custody, ParseLedgerRejectsBroken) {
  CustodyLedger l({}, fixed_clock());
  l.append(CustodyAction::Analyzed, "x", "-");
  auto c = l.content();
  c[c.find("Analyzed")] = 'B';
  try {
    parse_ledger(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LedgerCorrupt);
  }
}

// Property: any single byte flip is caught at or before the flipped record.
TEST(CustodyProperty, SingleByteFlipsDetected) {
  CustodyLedger l({}, fixed_clock());
  for (int i = 0; i < 60; ++i) l.append(CustodyAction::Registered, "e" + std::to_string(i), std::string(64, 'b'));
  const auto content = l.content();
  std::mt19937 rng(11);
  for (int k = 0; k < 300; ++k) {
    auto mutated = content;
    const auto pos = rng() % mutated.size();
    mutated[pos] = static_cast<char>(mutated[pos] ^ (1 + rng() % 255));
    const auto line = static_cast<std::uint64_t>(std::count(content.begin(), content.begin() + pos, '\n'));
    const auto v = ledger_verify(mutated);
    ASSERT_FALSE(v.ok) << pos;
    EXPECT_LE(v.broken_seq, line) << pos;
  }
}
