#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "scout/docx.hpp"
#include "scout/rules.hpp"
#include "support.hpp"

using namespace scout;
namespace st = scout::testing;
namespace fs = std::filesystem;

namespace {
UtcTime t(const char* s) { return *parse_iso(s); }
bool has_flag(const std::vector<RuleFlag>& fs, std::string_view label, Severity sev) {
  for (const auto& f : fs)
    if (f.label == label && f.severity == sev) return true;
  return false;
}
}  // namespace

// The zip writer is itself checked against Python's zipfile so that the
// docx fixtures are valid archives independent of our reader.
TEST(Zip, FixturesReadableByPython) {
  if (!st::have_python()) GTEST_SKIP();
  st::TempDir dir;
  st::write_bytes(dir / "f.docx", st::make_docx(st::fig6_docx_spec()));
  const auto r = st::run_python(
      "import zipfile, sys, re\n"
      "z = zipfile.ZipFile(sys.argv[1])\n"
      "assert z.testzip() is None\n"
      "core = z.read('docProps/core.xml').decode()\n"
      "print(re.search(r'<cp:lastModifiedBy>(.*?)<', core).group(1))\n",
      {(dir / "f.docx").string()});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "Admin\n");
}

TEST(Zip, ReadsStoredAndDeflated) {
  const auto z = st::make_zip({{"a.txt", "stored", false}, {"b.txt", std::string(5000, 'b'), true}});
  ZipArchive ar(as_bytes(z));
  EXPECT_EQ(ar.entries().size(), 2u);
  EXPECT_EQ(ar.read("a.txt"), "stored");
  EXPECT_EQ(ar.read("b.txt"), std::string(5000, 'b'));
  EXPECT_FALSE(ar.read("c.txt"));
}

TEST(Zip, Errors) {
  auto code_of = [](std::string_view b) {
    try {
      ZipArchive a(as_bytes(b));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Usage;
  };
  EXPECT_EQ(code_of("hello"), ErrorCode::NotZip);
  EXPECT_EQ(code_of(std::string("PK\x03\x04", 4) + std::string(40, 'x')), ErrorCode::CorruptArchive);
}

TEST(Docx, Fig6Metadata) {
  const auto doc = extract_docx(as_bytes(st::make_docx(st::fig6_docx_spec())));
  EXPECT_EQ(doc.metadata.created, t("2024-12-26T07:10:00Z"));
  EXPECT_EQ(doc.metadata.modified, t("2024-12-24T09:17:00Z"));
  EXPECT_EQ(doc.metadata.last_modified_by, "Admin");
  EXPECT_EQ(doc.metadata.author, "j.doe");
  EXPECT_NE(doc.text.find("Wire the remaining balance"), std::string::npos);
  const auto r = render_document(doc);
  EXPECT_NE(r.find("Last modified by: Admin"), std::string::npos);
}

TEST(Docx, EntitiesAndMissingCore) {
  st::DocxSpec s;
  s.paragraphs = {"A & B < C", "second"};
  const auto doc = extract_docx(as_bytes(st::make_docx(s)));
  EXPECT_NE(doc.text.find("A & B < C"), std::string::npos);
  EXPECT_FALSE(doc.metadata.created);
  EXPECT_EQ(xml_unescape("&lt;&#65;&#x42;&amp;"), "<AB&");
}

TEST(Docx, MissingDocumentPartFails) {
  const auto z = st::make_zip({{"[Content_Types].xml", "<Types/>"}});
  EXPECT_THROW(extract_docx(as_bytes(z)), Error);
}

TEST(Rules, Fig6Flags) {
  const auto doc = extract_docx(as_bytes(st::make_docx(st::fig6_docx_spec())));
  const auto flags = metadata_rule_flags(doc.metadata, RuleConfig{}, t("2025-06-01T00:00:00Z"));
  ASSERT_EQ(flags.size(), 2u);
  EXPECT_TRUE(has_flag(flags, "metadata-anomaly", Severity::High));
  EXPECT_TRUE(has_flag(flags, "suspicious-author", Severity::Medium));
}

TEST(Rules, FutureTimestampUsesAnalysisTime) {
  DocMetadata m;
  m.created = t("2030-01-01T00:00:00Z");
  EXPECT_TRUE(has_flag(metadata_rule_flags(m, {}, t("2025-01-01T00:00:00Z")), "future-timestamp", Severity::Medium));
  EXPECT_TRUE(metadata_rule_flags(m, {}, t("2031-01-01T00:00:00Z")).empty());
}

TEST(Rules, DisabledAndCustomAuthors) {
  DocMetadata m;
  m.last_modified_by = " root ";
  RuleConfig rc;
  rc.suspicious_authors = {"ROOT"};
  EXPECT_EQ(metadata_rule_flags(m, rc, {}).size(), 1u);
  rc.enabled = {};
  EXPECT_TRUE(metadata_rule_flags(m, rc, {}).empty());
  EXPECT_EQ(parse_severity("HIGH"), Severity::High);
  EXPECT_EQ(parse_severity("bogus"), Severity::Low);
}

TEST(Rules, CleanDocHasNoFlags) {
  auto s = st::fig6_docx_spec();
  s.modified = "2024-12-27T00:00:00";
  s.last_modified_by = "j.doe";
  const auto doc = extract_docx(as_bytes(st::make_docx(s)));
  EXPECT_TRUE(metadata_rule_flags(doc.metadata, {}, t("2025-06-01T00:00:00Z")).empty());
}
