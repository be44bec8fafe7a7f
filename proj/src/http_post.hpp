#pragma once

#include <chrono>
#include <string>

namespace flashrank::detail {

/// POSTs a JSON body to `url` (http://host[:port]/path) and returns the
/// response body. Non-2xx statuses and transport errors throw a remote error
/// that names the endpoint and status.
std::string PostJson(const std::string& url, const std::string& body,
                     const std::string& bearer_token,
                     std::chrono::milliseconds timeout);

}  // namespace flashrank::detail
