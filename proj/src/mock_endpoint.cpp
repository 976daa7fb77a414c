#include "scout/mock_endpoint.hpp"

#include <httplib.h>

#include "scout/common.hpp"

namespace scout {

std::string mock_reply(const nlohmann::json& request, const MockOptions& opts) {
  if (opts.mode == MockMode::Refuse) return "I cannot help with that.";
  std::string seen;
  if (request.contains("messages")) seen = request["messages"].dump();
  const std::string digest = sha256_hex(seen);
  int relevance = opts.fixed_relevance;
  if (opts.mode == MockMode::HashRelevance) relevance = static_cast<int>(std::stoul(digest.substr(0, 8), nullptr, 16) % 11);
  nlohmann::ordered_json verdict;
  verdict["relevance"] = relevance;
  verdict["flags"] = nlohmann::ordered_json::array();
  if (opts.mode == MockMode::HashRelevance && relevance >= 8)
    verdict["flags"].push_back({{"label", "mock-signal"}, {"severity", "high"}, {"rationale", "synthetic high score"}});
  verdict["summary"] = "Mock assessment " + digest.substr(0, 12) + ".";
  return "Assessment of the supplied evidence follows.\n\n```json\n" + verdict.dump(2) + "\n```\n";
}

MockModelServer::MockModelServer(MockOptions opts) : opts_(std::move(opts)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
  port_ = opts_.port == 0 ? server_->bind_to_any_port(opts_.host) : (server_->bind_to_port(opts_.host, opts_.port) ? opts_.port : -1);
  if (port_ <= 0) throw Error(ErrorCode::IoFailure, "mock endpoint could not bind " + opts_.host);
}

MockModelServer::~MockModelServer() { stop(); }

void MockModelServer::install_routes() {
  server_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    const int n = ++chat_calls_;
    {
      std::lock_guard lock(mu_);
      bodies_.push_back(req.body);
    }
    if (n <= opts_.fail_first) {
      res.status = opts_.fail_status;
      res.set_content(R"({"error":"injected failure"})", "application/json");
      return;
    }
    if (opts_.mode == MockMode::Error) {
      res.status = opts_.error_status;
      res.set_content(R"({"error":"mock error mode"})", "application/json");
      return;
    }
    const auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      res.status = 400;
      res.set_content(R"({"error":"body is not JSON"})", "application/json");
      return;
    }
    nlohmann::ordered_json out;
    out["id"] = "mock-" + std::to_string(n);
    out["object"] = "chat.completion";
    out["model"] = j.value("model", "mock");
    out["choices"] = {{{"index", 0},
                       {"message", {{"role", "assistant"}, {"content", mock_reply(j, opts_)}}},
                       {"finish_reason", "stop"}}};
    out["usage"] = {{"prompt_tokens", static_cast<long>(req.body.size() / 4)}, {"completion_tokens", 40}};
    res.set_content(out.dump(), "application/json");
  });
  server_->Post("/v1/audio/transcriptions", [this](const httplib::Request& req, httplib::Response& res) {
    ++asr_calls_;
    if (!req.has_file("file") || req.get_file_value("file").content.empty()) {
      res.status = 400;
      res.set_content(R"({"error":"empty upload"})", "application/json");
      return;
    }
    nlohmann::ordered_json out;
    out["text"] = opts_.asr_text;
    out["language"] = "en";
    out["segments"] = {{{"start", 0.0}, {"end", 1.0}, {"text", opts_.asr_text}}};
    res.set_content(out.dump(), "application/json");
  });
}

void MockModelServer::start() {
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockModelServer::run() { server_->listen_after_bind(); }

void MockModelServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockModelServer::chat_url() const {
  return "http://" + opts_.host + ":" + std::to_string(port_) + "/v1/chat/completions";
}

std::string MockModelServer::asr_url() const {
  return "http://" + opts_.host + ":" + std::to_string(port_) + "/v1/audio/transcriptions";
}

std::vector<std::string> MockModelServer::chat_bodies() const {
  std::lock_guard lock(mu_);
  return bodies_;
}

}  // namespace scout
