#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "flashrank/pipeline.hpp"

namespace flashrank {

struct ServiceRequest {
  std::string method;
  std::string path;
  std::string content_type;
  std::string body;
};

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Routes:
///   POST /rerank  {"query", "query_id"?, "budget"?, "tau"?, "candidates"?}
///   POST /expand  {"query", "query_id"?}
///   GET  /healthz
/// Malformed input answers 400, backend failures 502, unknown routes 404.
class RerankService {
 public:
  explicit RerankService(const Pipeline& pipeline) : pipeline_(pipeline) {}

  ServiceResponse Handle(const ServiceRequest& request) const;

  std::uint64_t requests_served() const { return served_.load(); }

 private:
  ServiceResponse Rerank(const std::string& body) const;
  ServiceResponse Expand(const std::string& body) const;

  const Pipeline& pipeline_;
  mutable std::atomic<std::uint64_t> served_{0};
};

/// Binds a RerankService to an HTTP listener on a background thread.
class HttpServer {
 public:
  explicit HttpServer(const Pipeline& pipeline);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int Start(const std::string& host, int port);
  /// Serves on the calling thread until Stop().
  void Listen(const std::string& host, int port);
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flashrank
