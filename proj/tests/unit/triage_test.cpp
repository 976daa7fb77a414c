#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "scout/chunking.hpp"
#include "scout/mock_endpoint.hpp"
#include "scout/triage.hpp"
#include "support.hpp"

using namespace scout;
namespace st = scout::testing;
namespace fs = std::filesystem;

namespace {
void expect_invariants(const Verdict& v) {
  EXPECT_GE(v.relevance, 0);
  EXPECT_LE(v.relevance, 10);
  EXPECT_TRUE(is_valid_utf8(v.summary));
  if (v.parse_status == ParseStatus::Degraded) {
    EXPECT_FALSE(v.summary.empty());
  }
}

AnalysisRun run_with(int relevance, std::vector<VerdictFlag> flags = {}) {
  AnalysisRun r;
  r.verdict.relevance = relevance;
  r.verdict.flags = std::move(flags);
  return r;
}
}  // namespace

TEST(Case, KeywordsNormalized) {
  const auto c = make_case_context("C-1", "bg", {"Wire", "wire", " Audit ", ""});
  EXPECT_EQ(c.keywords, (std::vector<std::string>{"wire", "audit"}));
  EXPECT_THROW(make_case_context("", "bg", {}), Error);
  EXPECT_EQ(case_from_json(case_to_json(c)), c);
}

TEST(Prompt, SystemTemplateCarriesCase) {
  const auto c = make_case_context("C-9", "Embezzlement inquiry.", {"ledger", "wire"}, "Focus on dates.");
  const auto s = system_prompt(EvidenceKind::Pcap, c);
  EXPECT_EQ(s.rfind("[scout template " + template_id(EvidenceKind::Pcap) + "]", 0), 0u);
  EXPECT_NE(s.find("Embezzlement inquiry."), std::string::npos);
  EXPECT_NE(s.find("- ledger"), std::string::npos);
  EXPECT_NE(s.find("Focus on dates."), std::string::npos);
  EXPECT_NE(s.find("relevance"), std::string::npos);
  EXPECT_EQ(template_tokens(EvidenceKind::Pcap, c), estimate_tokens(s) + 16);
  EXPECT_NE(template_id(EvidenceKind::Pcap), template_id(EvidenceKind::Docx));
}

TEST(Prompt, UserMessageIsChunkVerbatim) {
  const auto c = make_case_context("C", "", {});
  ExtractionUnit u{.ref = "chunk-0", .text = "exact text\nwith lines\n"};
  const auto msgs = build_prompt(EvidenceKind::PlainText, c, u);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, Role::System);
  EXPECT_EQ(msgs[1].text, u.text);
}

TEST(Verdict, FencedBlock) {
  const auto v = parse_verdict("Some prose.\n```json\n{\"relevance\": 8, \"flags\": [{\"label\": \"x\", \"severity\": \"HIGH\", "
                               "\"rationale\": \"r\"}], \"summary\": \"s\"}\n```\n");
  EXPECT_EQ(v.parse_status, ParseStatus::Structured);
  EXPECT_EQ(v.relevance, 8);
  ASSERT_EQ(v.flags.size(), 1u);
  EXPECT_EQ(v.flags[0].severity, Severity::High);
  EXPECT_EQ(v.summary, "s");
}

TEST(Verdict, LastBlockWinsAndClamps) {
  const auto v = parse_verdict("```json\n{\"relevance\": 2}\n```\nrevised:\n```json\n{\"relevance\": 14.6}\n```");
  EXPECT_EQ(v.relevance, 10);
  EXPECT_EQ(parse_verdict("{\"relevance\": -3}").relevance, 0);
  EXPECT_EQ(parse_verdict("{\"relevance\": 6.5}").relevance, 7);
}

TEST(Verdict, BareObjectFallback) {
  const auto v = parse_verdict("Result: {\"relevance\": 4, \"summary\": \"has } brace\"} done");
  EXPECT_EQ(v.parse_status, ParseStatus::Structured);
  EXPECT_EQ(v.summary, "has } brace");
}

TEST(Verdict, SchemaViolationsDegrade) {
  for (const char* raw : {"{\"relevance\": \"high\"}", "{\"flags\": []}", "{\"relevance\": 3, \"flags\": [{\"severity\": \"high\"}]}",
                          "{\"relevance\": 3, \"flags\": \"x\"}", "```json\n{bad json\n```", "I cannot help with that."}) {
    const auto v = parse_verdict(raw);
    EXPECT_EQ(v.parse_status, ParseStatus::Degraded) << raw;
    expect_invariants(v);
  }
}

TEST(Verdict, DegradedHeuristics) {
  EXPECT_EQ(parse_verdict("This looks suspicious to me").relevance, 5);
  EXPECT_EQ(parse_verdict("Nothing here").relevance, 1);
  EXPECT_EQ(parse_verdict("").summary, "(empty model response)");
  const std::string long_text(2000, 'z');
  EXPECT_EQ(parse_verdict(long_text).summary.size(), kSummaryChars);
  std::string multibyte;
  for (int i = 0; i < 600; ++i) multibyte += "漢";
  EXPECT_EQ(parse_verdict(multibyte).summary.size(), kSummaryChars * 3);
}

// Property: total and invariant-preserving on arbitrary bytes.
TEST(VerdictProperty, FuzzTotal) {
  std::mt19937 rng(21);
  const std::vector<std::string> seeds{"```json\n", "```", "{", "}", "\"relevance\":", "\"flags\":[", "]", "7", "-1e9",
                                       "\"", "\\", "null", ",", "\xff", "\xe6\xbc", "summary"};
  for (int i = 0; i < 20000; ++i) {
    std::string s;
    const int n = rng() % 30;
    for (int k = 0; k < n; ++k) {
      if (rng() % 3 == 0) s += static_cast<char>(rng());
      else s += seeds[rng() % seeds.size()];
    }
    Verdict v;
    ASSERT_NO_THROW(v = parse_verdict(s));
    ASSERT_GE(v.relevance, 0);
    ASSERT_LE(v.relevance, 10);
    ASSERT_TRUE(is_valid_utf8(v.summary));
  }
}

TEST(Verdict, JsonRoundTrip) {
  const auto v = parse_verdict("```json\n{\"relevance\": 3, \"flags\": [{\"label\": \"a\", \"severity\": \"medium\"}]}\n```");
  EXPECT_EQ(verdict_from_json(verdict_to_json(v)), v);
  const auto u = unavailable_verdict("down");
  EXPECT_EQ(u.relevance, 0);
  EXPECT_EQ(u.flags.at(0).label, kModelUnavailable);
}

TEST(Runs, IdIsStableKey) {
  const auto a = make_run_id("e1", EvidenceKind::Pcap, "p", "chunk-0", 0);
  EXPECT_EQ(a, make_run_id("e1", EvidenceKind::Pcap, "p", "chunk-0", 0));
  EXPECT_EQ(a, st::oracle_sha256("e1|Pcap|p|chunk-0|0").substr(0, 16));
  EXPECT_NE(a, make_run_id("e1", EvidenceKind::Pcap, "p", "chunk-0", 1));
}

TEST(Runs, StoreRoundTrip) {
  st::TempDir dir;
  RunStore store(dir / "runs");
  AnalysisRun r;
  r.run_id = "abc";
  r.evidence_id = "e";
  r.chunk_ref = "chunk-0";
  r.profile_name = "p";
  r.request = {{"profile", "p"}};
  r.verdict = parse_verdict("{\"relevance\": 4}");
  store.save(r);
  const auto back = store.load("abc");
  ASSERT_TRUE(back);
  EXPECT_EQ(back->verdict, r.verdict);
  EXPECT_EQ(back->request, r.request);
  EXPECT_FALSE(store.load("zzz"));
  EXPECT_EQ(store.load_all().size(), 1u);
}

TEST(Score, Formula) {
  std::vector<AnalysisRun> runs{run_with(3), run_with(6, {{"a", Severity::High, ""}, {"b", Severity::Low, ""}})};
  EXPECT_DOUBLE_EQ(score_evidence(runs, {}), 6.5);
  std::vector<RuleFlag> rf{{"metadata-anomaly", Severity::High, "", "metadata-anomaly"}};
  std::vector<AnalysisRun> low{run_with(2)};
  EXPECT_DOUBLE_EQ(score_evidence(low, rf), 7.5);
  std::vector<AnalysisRun> top{run_with(10, {{"a", Severity::High, ""}})};
  EXPECT_DOUBLE_EQ(score_evidence(top, {}), 10);
  EXPECT_DOUBLE_EQ(score_evidence({}, {}), 0);
}

// Property: adding a run or a high flag never lowers the score.
TEST(ScoreProperty, Monotone) {
  std::mt19937 rng(6);
  for (int i = 0; i < 2000; ++i) {
    std::vector<AnalysisRun> runs;
    const int n = rng() % 4;
    for (int k = 0; k < n; ++k) runs.push_back(run_with(rng() % 11, {{"l" + std::to_string(rng() % 3), Severity::High, ""}}));
    const double before = score_evidence(runs, {});
    auto more = runs;
    more.push_back(run_with(rng() % 11, {{"l" + std::to_string(rng() % 5), rng() % 2 ? Severity::High : Severity::Low, ""}}));
    ASSERT_GE(score_evidence(more, {}), before);
    std::vector<RuleFlag> rf{{"r", Severity::High, "", "x"}};
    ASSERT_GE(score_evidence(runs, rf), before);
  }
}

// Property: ranking does not depend on input order.
TEST(RankProperty, PermutationInvariant) {
  std::mt19937 rng(13);
  for (int i = 0; i < 200; ++i) {
    std::vector<PriorityEntry> es;
    const int n = 1 + rng() % 20;
    for (int k = 0; k < n; ++k)
      es.push_back({"id" + std::to_string(k), "p" + std::to_string(rng() % 8) + "/" + std::to_string(k), static_cast<double>(rng() % 5)});
    const auto ranked = rank_corpus(es);
    std::shuffle(es.begin(), es.end(), rng);
    ASSERT_EQ(rank_corpus(es), ranked);
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      ASSERT_EQ(ranked[k].rank, static_cast<int>(k + 1));
      if (k) {
        ASSERT_GE(ranked[k - 1].aggregate_score, ranked[k].aggregate_score);
        if (ranked[k - 1].aggregate_score == ranked[k].aggregate_score) ASSERT_LT(ranked[k - 1].path, ranked[k].path);
      }
    }
  }
}

TEST(Analyze, RunsReusedAndUnavailableRetried) {
  st::TempDir dir;
  MockModelServer server({.mode = MockMode::FixedRelevance, .fixed_relevance = 4});
  server.start();
  ModelProfile p{.name = "t", .endpoint_url = server.chat_url(), .model_id = "m", .max_retries = 0};
  Gateway gw({p}, {.backoff_base = std::chrono::milliseconds(1)});
  RunStore store(dir / "runs");
  CustodyLedger ledger(dir / "ledger.jsonl");
  EvidenceItem item{.id = "e1", .path = "a.txt", .kind = EvidenceKind::PlainText};
  ExtractionResult ex{.evidence_id = "e1", .path = "a.txt", .kind = EvidenceKind::PlainText};
  ex.units = {{.ref = "chunk-0", .text = "one"}, {.ref = "chunk-1", .text = "two"}};
  const auto ctx = make_case_context("C", "", {});
  AnalyzeContext actx{&gw, &store, &ledger};

  auto runs = analyze_evidence(item, ex, ctx, {"t"}, 2, actx);
  ASSERT_EQ(runs.size(), 4u);
  for (const auto& r : runs) {
    EXPECT_EQ(r.verdict.relevance, 4);
    EXPECT_EQ(r.verdict.parse_status, ParseStatus::Structured);
    EXPECT_EQ(r.request_digest, st::oracle_sha256(r.request.dump()));
  }
  EXPECT_EQ(server.chat_calls(), 4);
  EXPECT_EQ(ledger.size(), 4u);

  runs = analyze_evidence(item, ex, ctx, {"t"}, 2, actx);
  EXPECT_EQ(server.chat_calls(), 4);
  EXPECT_EQ(ledger.size(), 4u);

  // An unavailable run is retried on the next pass.
  ModelProfile dead = p;
  dead.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  Gateway dead_gw({dead}, {.backoff_base = std::chrono::milliseconds(1)});
  st::TempDir dir2;
  RunStore store2(dir2 / "runs");
  AnalyzeContext dctx{&dead_gw, &store2, nullptr};
  runs = analyze_evidence(item, ex, ctx, {"t"}, 1, dctx);
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_TRUE(runs[0].model_unavailable());
  EXPECT_EQ(runs[0].verdict.flags.at(0).label, kModelUnavailable);
  AnalyzeContext lctx{&gw, &store2, nullptr};
  runs = analyze_evidence(item, ex, ctx, {"t"}, 1, lctx);
  EXPECT_FALSE(runs[0].model_unavailable());
  EXPECT_EQ(server.chat_calls(), 6);
}
