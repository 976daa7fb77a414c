#pragma once

#include <string>
#include <string_view>

namespace scout {

/// "http://host:port/path" split into the client base and request path.
struct HttpUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // begins with '/'
};

/// Throws Error(InvalidConfig) for anything other than an http:// URL.
HttpUrl parse_http_url(std::string_view url);

}  // namespace scout
