#include "flashrank/service.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "flashrank/error.hpp"
#include "flashrank/json_io.hpp"

namespace flashrank {

namespace {

ServiceResponse ErrorResponse(int status, const std::string& reason) {
  OrderedJson j;
  j["error"] = reason;
  return ServiceResponse{status, j.dump()};
}

int StatusFor(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kValidation:
      return 400;
    case ErrorKind::kRemote:
      return 502;
    case ErrorKind::kIo:
      return 500;
  }
  return 500;
}

nlohmann::json ParseObject(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ValidationError("request body is not valid JSON");
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

std::string RequireString(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw ValidationError(std::string("\"") + field + "\" must be a string");
  }
  return j[field].get<std::string>();
}

std::string OptionalId(const nlohmann::json& j) {
  if (!j.contains("query_id")) return kDefaultQueryId;
  if (!j["query_id"].is_string()) throw ValidationError("\"query_id\" must be a string");
  return j["query_id"].get<std::string>();
}

}  // namespace

ServiceResponse RerankService::Handle(const ServiceRequest& request) const {
  ++served_;
  const bool is_post = request.method == "POST";
  if (request.path == "/healthz") {
    if (request.method != "GET") return ErrorResponse(405, "use GET /healthz");
    OrderedJson j;
    j["status"] = "ok";
    return ServiceResponse{200, j.dump()};
  }
  if (request.path != "/rerank" && request.path != "/expand") {
    return ErrorResponse(404, "no route " + request.method + " " + request.path);
  }
  if (!is_post) return ErrorResponse(405, "use POST " + request.path);
  if (request.content_type.rfind("application/json", 0) != 0) {
    return ErrorResponse(415, "content type must be application/json");
  }
  try {
    return request.path == "/rerank" ? Rerank(request.body) : Expand(request.body);
  } catch (const Error& e) {
    return ErrorResponse(StatusFor(e), e.what());
  } catch (const std::exception& e) {
    return ErrorResponse(500, e.what());
  }
}

ServiceResponse RerankService::Rerank(const std::string& body) const {
  const auto j = ParseObject(body);
  const std::string query = RequireString(j, "query");
  const std::string query_id = OptionalId(j);

  QueryOverrides overrides;
  if (j.contains("budget")) {
    const auto& b = j["budget"];
    if (!b.is_number_integer()) throw ValidationError("\"budget\" must be an integer");
    if (b.get<long long>() < 1) throw ValidationError("budget must be >= 1");
    overrides.budget = b.get<std::size_t>();
  }
  if (j.contains("tau")) {
    if (!j["tau"].is_number()) throw ValidationError("\"tau\" must be a number");
    overrides.tau = j["tau"].get<double>();
  }

  PipelineRun run;
  if (j.contains("candidates")) {
    const auto& list = j["candidates"];
    if (!list.is_array()) throw ValidationError("\"candidates\" must be an array");
    if (list.size() > pipeline_.config().max_inline_candidates) {
      return ErrorResponse(413, "at most " +
                                    std::to_string(pipeline_.config().max_inline_candidates) +
                                    " inline candidates are accepted");
    }
    CandidateSet set;
    set.query_id = query_id;
    for (const auto& c : list) {
      if (!c.is_object()) throw ValidationError("each candidate must be an object");
      std::optional<Embedding> emb;
      if (c.contains("embedding") && !c["embedding"].is_null()) {
        if (!c["embedding"].is_array()) throw ValidationError("candidate embedding must be an array");
        emb = Embedding{};
        for (const auto& x : c["embedding"]) {
          if (!x.is_number()) throw ValidationError("candidate embedding entries must be numbers");
          emb->push_back(x.get<double>());
        }
      }
      const std::string id = RequireString(c, "id");
      if (id.empty()) throw ValidationError("candidate id must be non-empty");
      set.candidates.push_back(Candidate{MakeDocument(id, RequireString(c, "text"), emb), 0.0});
    }
    SortCandidates(set);
    run = pipeline_.RunWithCandidates(query_id, query, std::move(set), overrides);
  } else {
    run = pipeline_.Run(query_id, query, overrides);
  }
  return ServiceResponse{200, SelectionJson(run.selection)};
}

ServiceResponse RerankService::Expand(const std::string& body) const {
  const auto j = ParseObject(body);
  const auto eq = pipeline_.Expand(OptionalId(j), RequireString(j, "query"));
  return ServiceResponse{200, ToJson(eq).dump()};
}

struct HttpServer::Impl {
  explicit Impl(const Pipeline& pipeline) : service(pipeline) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      const ServiceResponse r = service.Handle(
          ServiceRequest{req.method, req.path, req.get_header_value("Content-Type"), req.body});
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
  }

  RerankService service;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(const Pipeline& pipeline) : impl_(std::make_unique<Impl>(pipeline)) {}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::Listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void HttpServer::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace flashrank
