#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace httplib {
class Server;
}

namespace scout {

enum class MockMode {
  HashRelevance,   // relevance derived from the request content
  FixedRelevance,  // same verdict for every request
  Refuse,          // prose refusal, no JSON block
  Error,           // every chat call answers with error_status
};

struct MockOptions {
  MockMode mode = MockMode::HashRelevance;
  int fixed_relevance = 5;
  /// The first `fail_first` chat calls answer with `fail_status`.
  int fail_first = 0;
  int fail_status = 500;
  int error_status = 400;
  std::string asr_text = "hello world";
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
};

/// Assistant text the mock produces for a chat-completions body. Pure.
std::string mock_reply(const nlohmann::json& request, const MockOptions& opts);

/// Local chat-completions and transcription endpoint for tests and demos.
class MockModelServer {
 public:
  explicit MockModelServer(MockOptions opts = {});
  ~MockModelServer();
  MockModelServer(const MockModelServer&) = delete;
  MockModelServer& operator=(const MockModelServer&) = delete;

  void start();
  /// Blocks in the calling thread until stop().
  void run();
  void stop();

  int port() const { return port_; }
  std::string chat_url() const;
  std::string asr_url() const;

  int chat_calls() const { return chat_calls_.load(); }
  int asr_calls() const { return asr_calls_.load(); }
  std::vector<std::string> chat_bodies() const;

 private:
  void install_routes();

  MockOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> chat_calls_{0};
  std::atomic<int> asr_calls_{0};
  mutable std::mutex mu_;
  std::vector<std::string> bodies_;
};

}  // namespace scout
