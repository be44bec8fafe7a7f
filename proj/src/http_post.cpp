#include "http_post.hpp"

#include <httplib.h>

#include "flashrank/error.hpp"

namespace flashrank::detail {

std::string PostJson(const std::string& url, const std::string& body,
                     const std::string& bearer_token,
                     std::chrono::milliseconds timeout) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint must be an absolute URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  if (!client.is_valid()) throw RemoteError("unsupported endpoint " + url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + bearer_token);
  }
  auto res = client.Post(path, headers, body, "application/json");
  if (!res) {
    throw RemoteError("request to " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw RemoteError("request to " + url + " returned status " +
                      std::to_string(res->status));
  }
  return res->body;
}

}  // namespace flashrank::detail
