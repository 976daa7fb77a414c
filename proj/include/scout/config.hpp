#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scout/evidence.hpp"
#include "scout/extract.hpp"
#include "scout/gateway.hpp"
#include "scout/media.hpp"
#include "scout/profile.hpp"
#include "scout/rules.hpp"
#include "scout/triage.hpp"

namespace scout {

/// Evidence kind (lowercase name) to profile names.
using ModelMap = std::map<std::string, std::vector<std::string>>;

struct MediaConfig {
  int image_max_dim = 1024;
  double video_max_duration_s = 1500;
  double frame_interval_s = 2;
  int max_frames = 64;
};

/// Workspace configuration, stored as JSON in `<workspace>/config`.
struct Config {
  std::vector<ModelProfile> profiles;
  ModelMap models;
  int runs_per_chunk = 1;
  RuleConfig rules;
  int max_concurrent = 2;
  long backoff_base_ms = 1000;
  MediaConfig media;
  AsrEndpoint asr;
  ConverterHook converter;
  int workers = 4;
};

Config default_config();
/// Missing keys keep their defaults. Throws Error(InvalidConfig).
Config config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const Config& c);
Config load_config(const std::filesystem::path& path);

GatewayOptions gateway_options(const Config& c);

/// Case file: the case context plus optional per-kind model lists and repetitions.
struct CaseFile {
  CaseContext context;
  ModelMap models;
  std::optional<int> runs_per_chunk;
};

CaseFile case_file_from_json(const nlohmann::json& j);
nlohmann::ordered_json case_file_to_json(const CaseFile& c);
CaseFile load_case_file(const std::filesystem::path& path);

/// Profiles for one kind: `override` if given, else the case's list, else the
/// config's, else every profile of the kind's modality. Media kinds keep only
/// vision profiles. Throws Error(InvalidConfig) for unknown names.
std::vector<std::string> profiles_for(EvidenceKind kind, const Config& config, const CaseFile& case_file,
                                      const std::vector<std::string>& override = {});

}  // namespace scout
