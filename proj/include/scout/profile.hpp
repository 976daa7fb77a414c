#pragma once

#include <string>
#include <string_view>

namespace scout {

enum class Modality { Text, Vision };

inline std::string_view to_string(Modality m) { return m == Modality::Vision ? "vision" : "text"; }

/// One configured chat-completion endpoint.
struct ModelProfile {
  std::string name;
  std::string endpoint_url;
  std::string model_id;
  Modality modality = Modality::Text;
  long max_context_tokens = 131072;
  double temperature = 0.2;
  int timeout_s = 120;
  int max_retries = 3;
  /// Endpoint accepts whole video parts; otherwise frames are sampled.
  bool video_native = false;

  bool operator==(const ModelProfile&) const = default;
};

/// Throws Error(InvalidConfig) when an invariant is violated.
void validate(const ModelProfile& p);

}  // namespace scout
