#include "scout/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "scout/http.hpp"

namespace scout {

using nlohmann::ordered_json;

std::string_view to_string(Role r) { return r == Role::System ? "system" : "user"; }

ModelError::ModelError(int status, std::string body)
    : Error(ErrorCode::ModelError, "endpoint returned " + std::to_string(status) + ": " + body.substr(0, 300)),
      status_(status),
      body_(std::move(body)) {}

namespace {

ordered_json attachment_json(const MediaAttachment& a) {
  ordered_json j;
  j["media_kind"] = a.media_kind == MediaKind::Video ? "video" : "image";
  j["mime"] = a.mime;
  j["payload_sha256"] = a.payload_base64.empty() ? "" : sha256_hex(ByteView(base64_decode(a.payload_base64)));
  j["file_ref"] = a.file_ref;
  j["width"] = a.width ? ordered_json(*a.width) : ordered_json(nullptr);
  j["height"] = a.height ? ordered_json(*a.height) : ordered_json(nullptr);
  j["duration_s"] = a.duration_s ? ordered_json(*a.duration_s) : ordered_json(nullptr);
  j["downscaled"] = a.downscaled;
  j["segment_start_s"] = a.segment_start_s ? ordered_json(*a.segment_start_s) : ordered_json(nullptr);
  j["segment_end_s"] = a.segment_end_s ? ordered_json(*a.segment_end_s) : ordered_json(nullptr);
  return j;
}

std::string data_url(std::string_view mime, std::string_view b64) {
  return "data:" + std::string(mime) + ";base64," + std::string(b64);
}

std::string seconds_label(double s) {
  std::ostringstream os;
  os << s << "s";
  return os.str();
}

}  // namespace

ordered_json canonical_request(const ChatRequest& req) {
  ordered_json j;
  j["profile"] = req.profile;
  j["messages"] = ordered_json::array();
  for (const auto& m : req.messages) {
    ordered_json mj;
    mj["role"] = to_string(m.role);
    mj["text"] = m.text;
    mj["attachments"] = ordered_json::array();
    for (const auto& a : m.attachments) mj["attachments"].push_back(attachment_json(a));
    j["messages"].push_back(std::move(mj));
  }
  return j;
}

std::string request_digest(const ChatRequest& req) { return sha256_hex(canonical_request(req).dump()); }

ordered_json wire_body(const ChatRequest& req, const ModelProfile& profile, const WireOptions& opts) {
  if (std::none_of(req.messages.begin(), req.messages.end(), [](const auto& m) { return m.role == Role::User; }))
    throw Error(ErrorCode::InvalidConfig, "request has no user message");
  ordered_json body;
  body["model"] = profile.model_id;
  body["temperature"] = profile.temperature;
  body["messages"] = ordered_json::array();
  for (const auto& m : req.messages) {
    ordered_json mj;
    mj["role"] = to_string(m.role);
    if (m.attachments.empty()) {
      mj["content"] = m.text;
      body["messages"].push_back(std::move(mj));
      continue;
    }
    if (profile.modality != Modality::Vision)
      throw Error(ErrorCode::InvalidConfig, "profile " + profile.name + " cannot take attachments");
    std::string text = m.text;
    ordered_json media = ordered_json::array();
    for (const auto& a : m.attachments) {
      if (a.media_kind == MediaKind::Image) {
        media.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(a.mime, a.payload_base64)}}}});
      } else if (profile.video_native) {
        const auto bytes = read_file(a.file_ref);
        media.push_back({{"type", "video_url"}, {"video_url", {{"url", data_url(a.mime, base64_encode(bytes))}}}});
      } else {
        const auto frames = sample_video_frames(a, opts.frame_interval_s, opts.max_frames, opts.frame_max_dim);
        text += "\nFrames sampled at:";
        for (const auto& f : frames) {
          text += " " + seconds_label(f.segment_start_s.value_or(0));
          media.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(f.mime, f.payload_base64)}}}});
        }
      }
    }
    ordered_json parts = ordered_json::array();
    parts.push_back({{"type", "text"}, {"text", text}});
    for (auto& p : media) parts.push_back(std::move(p));
    mj["content"] = std::move(parts);
    body["messages"].push_back(std::move(mj));
  }
  return body;
}

std::string response_text(std::string_view body, std::optional<TokenUsage>* usage) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ModelError, "response is not a JSON object");
  const auto& choices = j.value("choices", nlohmann::json::array());
  if (!choices.is_array() || choices.empty() || !choices[0].is_object())
    throw Error(ErrorCode::ModelError, "response has no choices");
  const auto& msg = choices[0].value("message", nlohmann::json::object());
  if (!msg.is_object() || !msg.contains("content")) throw Error(ErrorCode::ModelError, "response has no message content");
  const auto& content = msg["content"];
  std::string text;
  if (content.is_string()) {
    text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content)
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") && part["text"].is_string())
        text += part["text"].get<std::string>();
  } else if (!content.is_null()) {
    throw Error(ErrorCode::ModelError, "message content has unexpected type");
  }
  if (usage) {
    usage->reset();
    if (j.contains("usage") && j["usage"].is_object()) {
      const auto& u = j["usage"];
      TokenUsage t;
      if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) t.prompt = u["prompt_tokens"].get<long>();
      if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer())
        t.completion = u["completion_tokens"].get<long>();
      *usage = t;
    }
  }
  return text;
}

Gateway::Gateway(std::vector<ModelProfile> profiles, GatewayOptions opts)
    : profiles_(std::move(profiles)), opts_(opts) {
  for (const auto& p : profiles_) validate(p);
  if (opts_.max_concurrent < 1) throw Error(ErrorCode::InvalidConfig, "gateway.max_concurrent must be >= 1");
  slots_ = std::make_unique<std::counting_semaphore<>>(opts_.max_concurrent);
}

const ModelProfile& Gateway::profile(std::string_view name) const {
  for (const auto& p : profiles_)
    if (p.name == name) return p;
  throw Error(ErrorCode::InvalidConfig, "unknown model profile: " + std::string(name));
}

ChatResponse Gateway::complete(const ChatRequest& req) {
  const auto& prof = profile(req.profile);
  const std::string body = wire_body(req, prof, opts_.wire).dump();
  const auto url = parse_http_url(prof.endpoint_url);

  slots_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*slots_};

  const auto start = std::chrono::steady_clock::now();
  std::string last_failure;
  bool last_was_timeout = false;
  const int attempts = 1 + std::max(0, prof.max_retries);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(opts_.backoff_base * (1L << std::min(attempt - 2, 20)));
    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::seconds(std::min(prof.timeout_s, 10)));
    client.set_read_timeout(std::chrono::seconds(prof.timeout_s));
    client.set_write_timeout(std::chrono::seconds(prof.timeout_s));
    const auto sent = std::chrono::steady_clock::now();
    auto res = client.Post(url.path, body, "application/json");
    if (!res) {
      const auto waited = std::chrono::steady_clock::now() - sent;
      last_was_timeout = res.error() == httplib::Error::Read && waited >= std::chrono::seconds(prof.timeout_s);
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_was_timeout = false;
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400 || res->status < 200) throw ModelError(res->status, res->body);
    ChatResponse out;
    out.raw_text = response_text(res->body, &out.token_usage);
    out.attempt_count = attempt;
    out.latency_ms = static_cast<long>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
    return out;
  }
  const std::string msg = prof.name + " (" + prof.endpoint_url + ") failed after " + std::to_string(attempts) +
                          " attempt(s): " + last_failure;
  throw Error(last_was_timeout ? ErrorCode::Timeout : ErrorCode::EndpointUnreachable, msg);
}

}  // namespace scout
