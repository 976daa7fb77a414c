#include "scout/config.hpp"

#include <algorithm>

namespace scout {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

std::vector<std::string> string_list(const json& v, const std::string& where) {
  if (!v.is_array()) bad(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) bad(where + " must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

ModelMap model_map(const json& v, const std::string& where) {
  if (!v.is_object()) bad(where + " must map evidence kinds to profile lists");
  ModelMap out;
  for (const auto& [k, names] : v.items()) {
    if (!parse_evidence_kind(k)) bad(where + ": unknown evidence kind " + k);
    out[to_lower(k)] = string_list(names, where + "." + k);
  }
  return out;
}

ordered_json model_map_json(const ModelMap& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

}  // namespace

Config default_config() {
  Config c;
  ModelProfile text;
  text.name = "local-text";
  text.endpoint_url = "http://127.0.0.1:8080/v1/chat/completions";
  text.model_id = "local-model";
  ModelProfile vision = text;
  vision.name = "local-vision";
  vision.model_id = "local-vision-model";
  vision.modality = Modality::Vision;
  c.profiles = {text, vision};
  c.asr.url = "http://127.0.0.1:8080/v1/audio/transcriptions";
  return c;
}

Config config_from_json(const json& j) {
  if (!j.is_object()) bad("config must be a JSON object");
  Config c = default_config();
  if (j.contains("profiles")) {
    const auto& ps = j["profiles"];
    if (!ps.is_object()) bad("profiles must be an object keyed by profile name");
    c.profiles.clear();
    for (const auto& [name, p] : ps.items()) {
      if (!p.is_object()) bad("profiles." + name + " must be an object");
      const std::string where = "profiles." + name;
      ModelProfile m;
      m.name = name;
      m.endpoint_url = get_or<std::string>(p, "endpoint_url", "", where);
      m.model_id = get_or<std::string>(p, "model_id", name, where);
      const auto modality = to_lower(get_or<std::string>(p, "modality", "text", where));
      if (modality != "text" && modality != "vision") bad(where + ".modality must be text or vision");
      m.modality = modality == "vision" ? Modality::Vision : Modality::Text;
      m.max_context_tokens = get_or<long>(p, "max_context_tokens", m.max_context_tokens, where);
      m.temperature = get_or<double>(p, "temperature", m.temperature, where);
      m.timeout_s = get_or<int>(p, "timeout_s", m.timeout_s, where);
      m.max_retries = get_or<int>(p, "max_retries", m.max_retries, where);
      m.video_native = get_or<bool>(p, "video_native", m.video_native, where);
      validate(m);
      c.profiles.push_back(std::move(m));
    }
  }
  if (j.contains("models")) c.models = model_map(j["models"], "models");
  c.runs_per_chunk = get_or<int>(j, "runs_per_chunk", c.runs_per_chunk, "config");
  if (c.runs_per_chunk < 1) bad("runs_per_chunk must be >= 1");
  if (j.contains("rules")) {
    const auto& r = j["rules"];
    if (!r.is_object()) bad("rules must be an object");
    if (r.contains("suspicious_authors")) c.rules.suspicious_authors = string_list(r["suspicious_authors"], "rules.suspicious_authors");
    if (r.contains("enabled")) {
      c.rules.enabled = string_list(r["enabled"], "rules.enabled");
      for (const auto& id : c.rules.enabled)
        if (std::find(registered_rules().begin(), registered_rules().end(), id) == registered_rules().end())
          bad("rules.enabled: unknown rule " + id);
    }
  }
  if (j.contains("gateway")) {
    const auto& g = j["gateway"];
    if (!g.is_object()) bad("gateway must be an object");
    c.max_concurrent = get_or<int>(g, "max_concurrent", c.max_concurrent, "gateway");
    c.backoff_base_ms = get_or<long>(g, "backoff_base_ms", c.backoff_base_ms, "gateway");
    if (c.max_concurrent < 1) bad("gateway.max_concurrent must be >= 1");
    if (c.backoff_base_ms < 0) bad("gateway.backoff_base_ms must be >= 0");
  }
  if (j.contains("media")) {
    const auto& m = j["media"];
    if (!m.is_object()) bad("media must be an object");
    c.media.image_max_dim = get_or<int>(m, "image_max_dim", c.media.image_max_dim, "media");
    c.media.video_max_duration_s = get_or<double>(m, "video_max_duration_s", c.media.video_max_duration_s, "media");
    c.media.frame_interval_s = get_or<double>(m, "frame_interval_s", c.media.frame_interval_s, "media");
    c.media.max_frames = get_or<int>(m, "max_frames", c.media.max_frames, "media");
    if (c.media.image_max_dim < 1 || c.media.video_max_duration_s <= 0 || c.media.frame_interval_s <= 0 ||
        c.media.max_frames < 1)
      bad("media limits must be positive");
  }
  if (j.contains("asr")) {
    const auto& a = j["asr"];
    if (!a.is_object()) bad("asr must be an object");
    c.asr.url = get_or<std::string>(a, "url", c.asr.url, "asr");
    c.asr.model = get_or<std::string>(a, "model", c.asr.model, "asr");
    c.asr.timeout_s = get_or<int>(a, "timeout_s", c.asr.timeout_s, "asr");
  }
  if (j.contains("converter")) {
    const auto& cv = j["converter"];
    if (!cv.is_object()) bad("converter must be an object");
    if (cv.contains("command")) c.converter.command = string_list(cv["command"], "converter.command");
    if (cv.contains("extensions")) {
      for (auto e : string_list(cv["extensions"], "converter.extensions")) {
        e = to_lower(trim(e));
        if (!e.empty() && e.front() != '.') e.insert(e.begin(), '.');
        c.converter.extensions.push_back(e);
      }
    }
  }
  if (j.contains("analyze")) {
    c.workers = get_or<int>(j["analyze"], "workers", c.workers, "analyze");
    if (c.workers < 1) bad("analyze.workers must be >= 1");
  }
  return c;
}

ordered_json config_to_json(const Config& c) {
  ordered_json j;
  j["profiles"] = ordered_json::object();
  for (const auto& p : c.profiles) {
    ordered_json pj;
    pj["endpoint_url"] = p.endpoint_url;
    pj["model_id"] = p.model_id;
    pj["modality"] = to_string(p.modality);
    pj["max_context_tokens"] = p.max_context_tokens;
    pj["temperature"] = p.temperature;
    pj["timeout_s"] = p.timeout_s;
    pj["max_retries"] = p.max_retries;
    pj["video_native"] = p.video_native;
    j["profiles"][p.name] = std::move(pj);
  }
  j["models"] = model_map_json(c.models);
  j["runs_per_chunk"] = c.runs_per_chunk;
  j["rules"] = {{"suspicious_authors", c.rules.suspicious_authors}, {"enabled", c.rules.enabled}};
  j["gateway"] = {{"max_concurrent", c.max_concurrent}, {"backoff_base_ms", c.backoff_base_ms}};
  j["media"] = {{"image_max_dim", c.media.image_max_dim},
                {"video_max_duration_s", c.media.video_max_duration_s},
                {"frame_interval_s", c.media.frame_interval_s},
                {"max_frames", c.media.max_frames}};
  j["asr"] = {{"url", c.asr.url}, {"model", c.asr.model}, {"timeout_s", c.asr.timeout_s}};
  j["converter"] = {{"command", c.converter.command}, {"extensions", c.converter.extensions}};
  j["analyze"] = {{"workers", c.workers}};
  return j;
}

Config load_config(const fs::path& path) {
  const auto j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) bad(path.string() + " is not valid JSON");
  return config_from_json(j);
}

GatewayOptions gateway_options(const Config& c) {
  GatewayOptions g;
  g.max_concurrent = c.max_concurrent;
  g.backoff_base = std::chrono::milliseconds(c.backoff_base_ms);
  g.wire.frame_interval_s = c.media.frame_interval_s;
  g.wire.max_frames = c.media.max_frames;
  g.wire.frame_max_dim = c.media.image_max_dim;
  return g;
}

CaseFile case_file_from_json(const json& j) {
  CaseFile c;
  c.context = case_from_json(j);
  if (j.contains("models")) c.models = model_map(j["models"], "models");
  if (j.contains("runs_per_chunk") && !j["runs_per_chunk"].is_null()) {
    if (!j["runs_per_chunk"].is_number_integer() || j["runs_per_chunk"].get<int>() < 1)
      bad("runs_per_chunk must be an integer >= 1");
    c.runs_per_chunk = j["runs_per_chunk"].get<int>();
  }
  return c;
}

ordered_json case_file_to_json(const CaseFile& c) {
  ordered_json j;
  j["case"] = case_to_json(c.context);
  if (!c.models.empty()) j["models"] = model_map_json(c.models);
  if (c.runs_per_chunk) j["runs_per_chunk"] = *c.runs_per_chunk;
  return j;
}

CaseFile load_case_file(const fs::path& path) {
  const auto j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) bad(path.string() + " is not valid JSON");
  return case_file_from_json(j);
}

std::vector<std::string> profiles_for(EvidenceKind kind, const Config& config, const CaseFile& case_file,
                                      const std::vector<std::string>& override) {
  const bool vision = kind == EvidenceKind::Image || kind == EvidenceKind::Video;
  const Modality want = vision ? Modality::Vision : Modality::Text;
  auto find = [&](const std::string& name) -> const ModelProfile& {
    for (const auto& p : config.profiles)
      if (p.name == name) return p;
    bad("unknown model profile: " + name);
  };
  const auto key = to_lower(to_string(kind));
  std::vector<std::string> names;
  if (!override.empty()) {
    names = override;
  } else if (auto it = case_file.models.find(key); it != case_file.models.end()) {
    names = it->second;
  } else if (auto it2 = config.models.find(key); it2 != config.models.end()) {
    names = it2->second;
  } else {
    for (const auto& p : config.profiles)
      if (p.modality == want) names.push_back(p.name);
    return names;
  }
  std::vector<std::string> out;
  for (const auto& n : names) {
    const auto& p = find(n);
    if (vision && p.modality != Modality::Vision) continue;
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  }
  return out;
}

}  // namespace scout
