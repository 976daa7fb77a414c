#include "scout/http.hpp"

#include "scout/common.hpp"

namespace scout {

HttpUrl parse_http_url(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (!istarts_with(url, kScheme)) throw Error(ErrorCode::InvalidConfig, "only http:// endpoints are supported: " + std::string(url));
  const auto rest = url.substr(kScheme.size());
  const auto slash = rest.find('/');
  const auto host = rest.substr(0, slash);
  if (host.empty()) throw Error(ErrorCode::InvalidConfig, "endpoint has no host: " + std::string(url));
  HttpUrl out;
  out.base = "http://" + std::string(host);
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  return out;
}

}  // namespace scout
