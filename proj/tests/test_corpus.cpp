#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <random>

#include "flashrank/corpus.hpp"
#include "flashrank/error.hpp"
#include "test_support.hpp"

using namespace flashrank;

namespace {

std::filesystem::path WriteTemp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("flashrank_corpus_" + name);
  std::ofstream(path) << content;
  return path;
}

std::string ErrorMessage(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(Tokenize("").empty());
  CHECK(Tokenize("Quarterly earnings, Q3.") ==
        std::vector<std::string>{"quarterly", "earnings", "q3"});
  CHECK(Tokenize("a a a") == std::vector<std::string>{"a", "a", "a"});
  CHECK(Tokenize("  --x__y\t\nZ!! ") == std::vector<std::string>{"x", "y", "z"});
}

TEST_CASE("ingest_jsonl happy path counts tokens and normalizes embeddings") {
  const auto path = WriteTemp("ok.jsonl",
                              R"({"id":"d1","text":"Apple pie, apple!","embedding":[3,4]})"
                              "\n\n"
                              R"({"id":"d2","text":"banana"})"
                              "\n");
  const Corpus corpus = IngestJsonl(path);
  REQUIRE(corpus.size() == 2);
  const auto& d1 = corpus.At("d1");
  CHECK(d1.token_count == 3);
  REQUIRE(d1.embedding);
  CHECK((*d1.embedding)[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK((*d1.embedding)[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK_FALSE(corpus.At("d2").embedding);
  CHECK(corpus.embedding_dim() == 2u);

  // Deterministic: a second ingest is structurally equal.
  CHECK(IngestJsonl(path) == corpus);
}

TEST_CASE("ingest_jsonl error paths") {
  SUBCASE("duplicate id names the id") {
    const auto path = WriteTemp("dup.jsonl", R"({"id":"d1","text":"a"})"
                                             "\n"
                                             R"({"id":"d1","text":"b"})"
                                             "\n");
    const auto msg = ErrorMessage([&] { IngestJsonl(path); });
    CHECK(msg.find("\"d1\"") != std::string::npos);
    CHECK(msg.find("duplicate") != std::string::npos);
  }
  SUBCASE("malformed line names the line number") {
    const auto path = WriteTemp("bad.jsonl", R"({"id":"d1","text":"a"})"
                                             "\n{not json\n");
    const auto msg = ErrorMessage([&] { IngestJsonl(path); });
    CHECK(msg.find("line 2") != std::string::npos);
  }
  SUBCASE("missing text field") {
    const auto path = WriteTemp("notext.jsonl", R"({"id":"d1"})"
                                                "\n");
    CHECK(ErrorMessage([&] { IngestJsonl(path); }).find("line 1") != std::string::npos);
  }
  SUBCASE("inconsistent embedding dimension") {
    const auto path = WriteTemp("dims.jsonl", R"({"id":"d1","text":"a","embedding":[1,0]})"
                                              "\n"
                                              R"({"id":"d2","text":"b","embedding":[1,0,0]})"
                                              "\n");
    CHECK(ErrorMessage([&] { IngestJsonl(path); }).find("dimension") != std::string::npos);
  }
  SUBCASE("zero-norm embedding") {
    const auto path = WriteTemp("zero.jsonl", R"({"id":"d1","text":"a","embedding":[0,0]})"
                                              "\n");
    CHECK(ErrorMessage([&] { IngestJsonl(path); }).find("zero-norm") != std::string::npos);
  }
  SUBCASE("missing file is an I/O error naming the path") {
    try {
      IngestJsonl("/nonexistent/corpus.jsonl");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIo);
      CHECK(std::string(e.what()).find("/nonexistent/corpus.jsonl") != std::string::npos);
    }
  }
}

TEST_CASE("load_embeddings attaches sidecar vectors") {
  const auto corpus_path = WriteTemp("plain.jsonl", R"({"id":"d1","text":"a"})"
                                                    "\n"
                                                    R"({"id":"d2","text":"b"})"
                                                    "\n"
                                                    R"({"id":"d3","text":"c"})"
                                                    "\n");
  const Corpus plain = IngestJsonl(corpus_path);

  SUBCASE("sidecar covering all ids") {
    const auto side = WriteTemp("side_all.jsonl", R"({"id":"d1","embedding":[2,0]})"
                                                  "\n"
                                                  R"({"id":"d2","embedding":[0,5]})"
                                                  "\n"
                                                  R"({"id":"d3","embedding":[1,1]})"
                                                  "\n");
    const Corpus embedded = LoadEmbeddings(side, plain);
    for (const auto& d : embedded.documents()) {
      REQUIRE(d.embedding);
      CHECK(Norm(*d.embedding) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK((*embedded.At("d1").embedding)[0] == 1.0);
  }
  SUBCASE("partial sidecar leaves other documents without vectors") {
    const auto side = WriteTemp("side_part.jsonl", R"({"id":"d2","embedding":[0,5]})"
                                                   "\n");
    const Corpus embedded = LoadEmbeddings(side, plain);
    CHECK(embedded.At("d2").embedding);
    CHECK_FALSE(embedded.At("d1").embedding);
  }
  SUBCASE("unknown id") {
    const auto side = WriteTemp("side_unknown.jsonl", R"({"id":"zz","embedding":[1,0]})"
                                                      "\n");
    CHECK(ErrorMessage([&] { LoadEmbeddings(side, plain); }).find("unknown") != std::string::npos);
  }
  SUBCASE("mixed dimensions") {
    const auto side = WriteTemp("side_mixed.jsonl", R"({"id":"d1","embedding":[1,0,0,0]})"
                                                    "\n"
                                                    R"({"id":"d2","embedding":[1,0,0,0,0]})"
                                                    "\n");
    CHECK(ErrorMessage([&] { LoadEmbeddings(side, plain); }).find("dimension") != std::string::npos);
  }
}

TEST_CASE("property: ingested documents satisfy the Document invariants") {
  std::mt19937_64 rng(7);
  std::string content;
  for (int i = 0; i < 50; ++i) {
    const auto text = testing::RandomText(rng, 1 + rng() % 40) + ", Extra-Punct!";
    const auto emb = testing::RandomUnit(rng, 8);
    nlohmann::json j = {{"id", "d" + std::to_string(i)}, {"text", text}};
    std::vector<double> scaled;
    for (double x : emb) scaled.push_back(x * (1.0 + static_cast<double>(i)));
    j["embedding"] = scaled;
    content += j.dump() + "\n";
  }
  const Corpus corpus = IngestJsonl(WriteTemp("prop.jsonl", content));
  for (const auto& d : corpus.documents()) {
    CHECK(d.token_count == Tokenize(d.text).size());
    REQUIRE(d.embedding);
    CHECK(std::abs(Norm(*d.embedding) - 1.0) <= 1e-6);
  }
}
