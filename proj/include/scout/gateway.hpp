#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scout/common.hpp"
#include "scout/media.hpp"
#include "scout/profile.hpp"

namespace scout {

enum class Role { System, User };
std::string_view to_string(Role r);

struct ChatMessage {
  Role role = Role::User;
  std::string text;
  std::vector<MediaAttachment> attachments;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string profile;  // ModelProfile name
  std::vector<ChatMessage> messages;

  bool operator==(const ChatRequest&) const = default;
};

struct TokenUsage {
  long prompt = 0;
  long completion = 0;
};

struct ChatResponse {
  std::string raw_text;
  std::optional<TokenUsage> token_usage;
  long latency_ms = 0;
  int attempt_count = 0;
};

/// 4xx from the endpoint; never retried.
class ModelError : public Error {
 public:
  ModelError(int status, std::string body);
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

/// Logical form of a request: media appear by digest and reference, not payload.
nlohmann::ordered_json canonical_request(const ChatRequest& req);
/// SHA-256 of the compact canonical form.
std::string request_digest(const ChatRequest& req);

struct WireOptions {
  double frame_interval_s = 2.0;
  int max_frames = 64;
  int frame_max_dim = 1024;
};

/// The chat-completions body sent on the wire. Video attachments become a
/// video part for native profiles, otherwise sampled frames.
nlohmann::ordered_json wire_body(const ChatRequest& req, const ModelProfile& profile, const WireOptions& opts = {});

/// choices[0].message.content. Throws Error(ModelError) when absent.
std::string response_text(std::string_view body, std::optional<TokenUsage>* usage = nullptr);

struct GatewayOptions {
  int max_concurrent = 2;
  std::chrono::milliseconds backoff_base{1000};
  WireOptions wire;
};

/// Shared by all workers; bounds in-flight calls with a counting semaphore.
class Gateway {
 public:
  explicit Gateway(std::vector<ModelProfile> profiles, GatewayOptions opts = {});

  const std::vector<ModelProfile>& profiles() const { return profiles_; }
  /// Throws Error(InvalidConfig) for unknown names.
  const ModelProfile& profile(std::string_view name) const;

  /// Throws EndpointUnreachable, Timeout or ModelError.
  ChatResponse complete(const ChatRequest& req);

 private:
  std::vector<ModelProfile> profiles_;
  GatewayOptions opts_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace scout
