#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "scout/mock_endpoint.hpp"

namespace {
scout::MockModelServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic local chat-completions and transcription endpoint", "scout-mock-model"};
  scout::MockOptions opts;
  std::string mode = "hash";
  app.add_option("--host", opts.host, "Bind address");
  app.add_option("--port,-p", opts.port, "Port, 0 picks a free one");
  app.add_option("--mode", mode, "hash, fixed, refuse or error")->check(CLI::IsMember({"hash", "fixed", "refuse", "error"}));
  app.add_option("--relevance", opts.fixed_relevance, "Relevance in fixed mode")->check(CLI::Range(0, 10));
  app.add_option("--fail-first", opts.fail_first, "Answer the first N chat calls with --fail-status");
  app.add_option("--fail-status", opts.fail_status, "Status for injected failures");
  app.add_option("--asr-text", opts.asr_text, "Transcript returned for audio uploads");
  CLI11_PARSE(app, argc, argv);

  if (mode == "fixed") opts.mode = scout::MockMode::FixedRelevance;
  else if (mode == "refuse") opts.mode = scout::MockMode::Refuse;
  else if (mode == "error") opts.mode = scout::MockMode::Error;

  try {
    scout::MockModelServer server(opts);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << server.chat_url() << "\n" << server.asr_url() << std::endl;
    server.run();
  } catch (const std::exception& e) {
    std::cerr << "scout-mock-model: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
