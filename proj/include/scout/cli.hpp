#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace scout {

/// Files an investigation keeps outside the evidence tree.
struct WorkspaceLayout {
  std::filesystem::path dir;

  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path ledger() const { return dir / "ledger.jsonl"; }
  std::filesystem::path runs() const { return dir / "runs"; }
  std::filesystem::path extractions() const { return dir / "extractions"; }
  std::filesystem::path report_json() const { return dir / "report.json"; }
  std::filesystem::path report_md() const { return dir / "report.md"; }
  std::filesystem::path config() const { return dir / "config"; }
  std::filesystem::path case_file() const { return dir / "case.json"; }
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kVerification = 2;
inline constexpr int kEnvironment = 3;
}  // namespace exit_code

/// args[0] is the program name. Human messages go to `err`, results to `out`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scout
