#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "flashrank/cli.hpp"
#include "flashrank/config.hpp"
#include "flashrank/error.hpp"
#include "flashrank/json_io.hpp"
#include "flashrank/pipeline.hpp"
#include "flashrank/service.hpp"
#include "test_support.hpp"

using namespace flashrank;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string ToyConf() { return testing::DataPath("toy.conf"); }

std::filesystem::path TempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("flashrank_iface_" + name);
}

ServiceRequest Post(const std::string& path, const std::string& body) {
  return ServiceRequest{"POST", path, "application/json", body};
}

const char* kExpectedAlpha =
    R"({"query_id":"q","selected":[{"doc_id":"d1","gain":1.85,"tokens_cum":300},)"
    R"({"doc_id":"d2","gain":0.8,"tokens_cum":700}],"total_tokens":700,"stop_reason":"oversize_break"})";

void CheckToySelection(const std::string& line) {
  const auto got = nlohmann::json::parse(line);
  const auto want = nlohmann::json::parse(kExpectedAlpha);
  CHECK(got["query_id"] == want["query_id"]);
  CHECK(got["total_tokens"] == 700);
  CHECK(got["stop_reason"] == "oversize_break");
  REQUIRE(got["selected"].size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(got["selected"][i]["doc_id"] == want["selected"][i]["doc_id"]);
    CHECK(got["selected"][i]["tokens_cum"] == want["selected"][i]["tokens_cum"]);
    CHECK(got["selected"][i]["gain"].get<double>() ==
          doctest::Approx(want["selected"][i]["gain"].get<double>()).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("config: file, sections, relative paths and key errors") {
  const auto config = PipelineConfig::Load(ToyConf());
  CHECK(config.expansion.m == 3);
  CHECK(config.expansion.query_weight == 1.0);
  CHECK(config.retrieval_n == 10);
  CHECK(config.paths.corpus == std::filesystem::path(testing::DataPath("toy_corpus.jsonl")));
  CHECK_NOTHROW(config.Validate());

  PipelineConfig c;
  CHECK_THROWS_WITH_AS(c.Set("selection.budjet", "5"), doctest::Contains("selection.budjet"), Error);
  CHECK_THROWS_WITH_AS(c.Set("coeffs.alpha", "abc"), doctest::Contains("coeffs.alpha"), Error);
  CHECK_THROWS_WITH_AS(c.Set("selection.oversize_policy", "wrap"),
                       doctest::Contains("selection.oversize_policy"), Error);
  c.Set("coeffs.gamma", "-1");
  CHECK_THROWS_WITH_AS(c.Validate(), doctest::Contains("coeffs.gamma"), Error);

  PipelineConfig missing;
  missing.paths.corpus = "/nonexistent/corpus.jsonl";
  CHECK_THROWS_WITH_AS(missing.Validate(), doctest::Contains("paths.corpus"), Error);

  for (const auto& key : PipelineConfig::Keys()) CHECK(EnvVarFor(key).rfind("FLASHRANK_", 0) == 0);
  CHECK(EnvVarFor("llm.token") == "FLASHRANK_LLM_TOKEN");
}

TEST_CASE("config: environment overrides") {
  std::map<std::string, std::string> env = {{"FLASHRANK_SELECTION_BUDGET", "1234"},
                                            {"FLASHRANK_LLM_TOKEN", "secret"}};
  PipelineConfig c;
  c.ApplyEnvironment([&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.selection.budget_tokens == 1234);
  CHECK(c.llm.token == "secret");
}

TEST_CASE("pipeline: toy run and stage-prefixed errors") {
  const auto pipeline = Pipeline::FromConfig(PipelineConfig::Load(ToyConf()));
  const auto run = pipeline.Run("q", "alpha");
  CheckToySelection(SelectionJson(run.selection));
  CHECK(run.candidates.size() == 4);
  CHECK(run.timings.total_ms >= run.timings.rerank_ms);

  QueryOverrides o;
  o.budget = 300;
  const auto small = pipeline.Run("q", "alpha", o);
  CHECK(small.selection.Ids() == std::vector<std::string>{"d1"});
  CHECK(small.selection.stop_reason == StopReason::kBudgetExact);

  o.budget = 0;
  CHECK_THROWS_WITH_AS(pipeline.Run("q", "alpha", o), doctest::Contains("rerank: "), Error);

  const auto queries = LoadQueries(testing::DataPath("toy_queries.tsv"));
  REQUIRE(queries.size() == 3);
  CHECK(queries[2].text == "alpha revenue");
}

TEST_CASE("service: routes, validation and inline candidates") {
  const auto pipeline = Pipeline::FromConfig(PipelineConfig::Load(ToyConf()));
  RerankService service(pipeline);

  auto r = service.Handle({"GET", "/healthz", "", ""});
  CHECK(r.status == 200);
  CHECK(nlohmann::json::parse(r.body)["status"] == "ok");
  CHECK(service.Handle({"GET", "/nope", "", ""}).status == 404);
  CHECK(service.Handle({"GET", "/rerank", "", ""}).status == 405);
  CHECK(service.Handle({"POST", "/rerank", "text/plain", R"({"query":"alpha"})"}).status == 415);

  r = service.Handle(Post("/rerank", R"({"query":"alpha"})"));
  REQUIRE(r.status == 200);
  CheckToySelection(r.body);

  r = service.Handle(Post("/rerank", R"({"query":"alpha","budget":0})"));
  CHECK(r.status == 400);
  CHECK(nlohmann::json::parse(r.body)["error"].get<std::string>().find("budget must be >= 1") !=
        std::string::npos);
  CHECK(service.Handle(Post("/rerank", R"({"budget":5})")).status == 400);
  CHECK(service.Handle(Post("/rerank", "{not json")).status == 400);
  CHECK(service.Handle(Post("/rerank", R"({"query":"alpha","tau":"x"})")).status == 400);

  r = service.Handle(Post("/rerank", R"({"query":"alpha","query_id":"inline","budget":50,"candidates":[
      {"id":"z","text":"alpha beta","embedding":[1,0]},
      {"id":"y","text":"alpha","embedding":[0,1]}]})"));
  REQUIRE(r.status == 200);
  const auto inline_body = nlohmann::json::parse(r.body);
  CHECK(inline_body["query_id"] == "inline");
  CHECK(inline_body["selected"][0]["doc_id"] == "z");

  std::string many = R"({"query":"alpha","candidates":[)";
  for (int i = 0; i < 300; ++i) {
    many += (i ? "," : "") + std::string(R"({"id":"c)") + std::to_string(i) + R"(","text":"x"})";
  }
  many += "]}";
  CHECK(service.Handle(Post("/rerank", many)).status == 413);

  r = service.Handle(Post("/expand", R"({"query":"alpha"})"));
  REQUIRE(r.status == 200);
  CHECK(nlohmann::json::parse(r.body)["expansion_terms"].size() == 2);
  CHECK(service.requests_served() >= 1);
}

TEST_CASE("service over HTTP") {
  const auto pipeline = Pipeline::FromConfig(PipelineConfig::Load(ToyConf()));
  HttpServer server(pipeline);
  const int port = server.Start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/rerank", R"({"query":"alpha"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CheckToySelection(res->body);
  res = client.Get("/healthz");
  REQUIRE(res);
  CHECK(res->status == 200);
  server.Stop();
}

TEST_CASE("cli: rerank, explain and exit codes") {
  auto r = Cli({"--config", ToyConf(), "rerank", "--query", "alpha"});
  REQUIRE(r.code == 0);
  CheckToySelection(r.out.substr(0, r.out.find('\n')));

  r = Cli({"--config", ToyConf(), "rerank", "--query", "alpha", "--explain"});
  CHECK(r.code == 0);
  CHECK(r.err.find("stop_reason: oversize_break") != std::string::npos);

  r = Cli({"--config", ToyConf(), "rerank", "--query", "alpha", "--budget", "0"});
  CHECK(r.code == 1);
  CHECK(r.err.find("budget") != std::string::npos);

  r = Cli({"--config", ToyConf(), "rerank", "--queries", testing::DataPath("toy_queries.tsv")});
  CHECK(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);

  CHECK(Cli({"--config", ToyConf(), "rerank"}).code == 1);
  CHECK(Cli({"--bogus-flag"}).code == 1);

  r = Cli({"index", "--corpus", "/nonexistent/corpus.jsonl", "--out", TempPath("idx.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/corpus.jsonl") != std::string::npos);

  PipelineConfig remote = PipelineConfig::Load(ToyConf());
  const auto conf = TempPath("remote.conf");
  std::ofstream(conf) << "[paths]\ncorpus = " << remote.paths.corpus.string() << "\nvocab = "
                      << remote.paths.vocab.string()
                      << "\n[ce]\nbackend = remote\nendpoint = http://127.0.0.1:1/score\n"
                         "timeout_ms = 500\n[coeffs]\ndelta = 1\n";
  r = Cli({"--config", conf.string(), "rerank", "--query", "alpha"});
  CHECK(r.code == 3);
}

TEST_CASE("cli: index refuses to overwrite and round-trips byte for byte") {
  const auto a = TempPath("index_a.json");
  const auto b = TempPath("index_b.json");
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  const auto corpus = testing::DataPath("toy_corpus.jsonl");
  CHECK(Cli({"index", "--corpus", corpus, "--out", a.string()}).code == 0);
  CHECK(Cli({"index", "--corpus", corpus, "--out", a.string()}).code == 1);
  CHECK(Cli({"index", "--corpus", corpus, "--out", a.string(), "--force"}).code == 0);
  CHECK(Cli({"index", "--corpus", corpus, "--out", b.string()}).code == 0);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(a) == slurp(b));
  CHECK(Bm25Index::Load(a).Serialize() == slurp(a));
}

TEST_CASE("cli: retrieve, eval and tune") {
  const auto run_path = TempPath("run.txt");
  auto r = Cli({"--config", ToyConf(), "retrieve", "--queries", testing::DataPath("toy_queries.tsv"),
                "--trec", "--out", run_path.string()});
  REQUIRE(r.code == 0);

  r = Cli({"eval", "--run", run_path.string(), "--qrels", testing::DataPath("toy_qrels.txt"),
           "--ndcg-k", "10", "--recall-k", "10"});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report.dump().find("ndcg") != std::string::npos);

  r = Cli({"--config", ToyConf(), "tune", "--instances", testing::DataPath("toy_tuning.jsonl"),
           "--grid-alpha", "0,1", "--grid-beta", "1", "--grid-gamma", "0,0.5", "--grid-delta", "0"});
  REQUIRE(r.code == 0);
  const auto tuned = nlohmann::json::parse(r.out);
  CHECK(tuned["grid_size"] == 4);

  r = Cli({"--config", ToyConf(), "tune", "--instances", testing::DataPath("toy_tuning.jsonl"),
           "--grid-alpha", "x"});
  CHECK(r.code == 1);
}
