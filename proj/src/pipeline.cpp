#include "flashrank/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "flashrank/error.hpp"

namespace flashrank {

namespace {

using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename Fn>
auto InStage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace

struct Pipeline::State {
  PipelineConfig config;
  Corpus corpus;
  Bm25Index index;
  TermVectors vocab;
  std::unique_ptr<CeScorer> scorer;
  std::unique_ptr<LlmClient> llm;
  std::optional<QueryExpander> expander;
};

std::unique_ptr<CeScorer> MakeCeScorer(const PipelineConfig& config) {
  switch (config.ce_backend) {
    case CeBackend::kPrecomputed:
      return std::make_unique<PrecomputedCeScorer>(PrecomputedCeScorer::Load(config.paths.ce_scores));
    case CeBackend::kRemote:
      return std::make_unique<RemoteCeScorer>(config.ce_remote.url, config.ce_remote.token,
                                              std::chrono::milliseconds(config.ce_remote.timeout_ms));
    case CeBackend::kLexicalStub:
      break;
  }
  return std::make_unique<LexicalStubCeScorer>();
}

Pipeline::Pipeline(Parts parts) {
  parts.config.expansion.Validate();
  parts.config.selection.Validate();
  parts.config.coeffs.Validate();
  auto state = std::make_shared<State>();
  state->config = std::move(parts.config);
  state->corpus = std::move(parts.corpus);
  state->index = parts.index ? std::move(*parts.index)
                             : Bm25Index::Build(state->corpus, state->config.bm25);
  state->vocab = std::move(parts.vocab);
  state->scorer = parts.scorer ? std::move(parts.scorer) : std::make_unique<LexicalStubCeScorer>();
  state->llm = std::move(parts.llm);
  state->expander.emplace(state->config.expansion, &state->vocab, state->llm.get(),
                          &state->index);
  state_ = std::move(state);
}

Pipeline Pipeline::FromConfig(const PipelineConfig& config) {
  config.Validate();
  if (config.paths.corpus.empty()) throw ValidationError("paths.corpus is required");
  Parts parts;
  parts.config = config;
  parts.corpus = IngestJsonl(config.paths.corpus);
  if (!config.paths.embeddings.empty()) {
    parts.corpus = LoadEmbeddings(config.paths.embeddings, parts.corpus);
  }
  if (!config.paths.index.empty() && std::filesystem::exists(config.paths.index)) {
    parts.index = Bm25Index::Load(config.paths.index);
    if (parts.index->doc_count() != parts.corpus.size()) {
      throw ValidationError("paths.index: index covers " + std::to_string(parts.index->doc_count()) +
                            " documents but the corpus has " + std::to_string(parts.corpus.size()));
    }
  }
  if (!config.paths.vocab.empty()) parts.vocab = LoadTermVectors(config.paths.vocab);
  parts.scorer = MakeCeScorer(config);
  if (!config.llm.url.empty()) {
    parts.llm = std::make_unique<HttpLlmClient>(config.llm.url, config.llm.token,
                                                std::chrono::milliseconds(config.llm.timeout_ms));
  }
  return Pipeline(std::move(parts));
}

ExpandedQuery Pipeline::Expand(const std::string& query_id, const std::string& text,
                               std::vector<std::string>* warnings) const {
  return state_->expander->Expand(query_id, text, warnings);
}

CandidateSet Pipeline::Retrieve(const ExpandedQuery& query) const {
  return HybridRetrieve(query, state_->index, state_->corpus, state_->config.retrieval_n,
                        state_->config.fusion);
}

SelectionConfig Pipeline::EffectiveSelection(const QueryOverrides& overrides) const {
  SelectionConfig sc = state_->config.selection;
  if (overrides.budget) sc.budget_tokens = *overrides.budget;
  if (overrides.tau) sc.tau = *overrides.tau;
  sc.Validate();
  return sc;
}

SelectionResult Pipeline::Select(const ExpandedQuery& query, const CandidateSet& candidates,
                                 const QueryOverrides& overrides) const {
  return FlashRankSelect(query, candidates, state_->config.coeffs, EffectiveSelection(overrides),
                         *state_->scorer);
}

PipelineRun Pipeline::Run(const std::string& query_id, const std::string& text,
                          const QueryOverrides& overrides) const {
  InStage("rerank", [&] { return EffectiveSelection(overrides); });
  PipelineRun run;
  const auto start = Clock::now();
  run.query = InStage("expand", [&] { return Expand(query_id, text, &run.warnings); });
  run.timings.expand_ms = MsSince(start);

  const auto retrieve_start = Clock::now();
  run.candidates = InStage("retrieve", [&] { return Retrieve(run.query); });
  run.timings.retrieve_ms = MsSince(retrieve_start);

  const auto rerank_start = Clock::now();
  run.selection = InStage("rerank", [&] { return Select(run.query, run.candidates, overrides); });
  run.timings.rerank_ms = MsSince(rerank_start);
  run.timings.total_ms = MsSince(start);
  return run;
}

PipelineRun Pipeline::RunWithCandidates(const std::string& query_id, const std::string& text,
                                        CandidateSet candidates,
                                        const QueryOverrides& overrides) const {
  InStage("rerank", [&] { return EffectiveSelection(overrides); });
  PipelineRun run;
  const auto start = Clock::now();
  run.query = InStage("expand", [&] { return Expand(query_id, text, &run.warnings); });
  run.timings.expand_ms = MsSince(start);
  candidates.query_id = query_id;
  run.candidates = std::move(candidates);
  const auto rerank_start = Clock::now();
  run.selection = InStage("rerank", [&] { return Select(run.query, run.candidates, overrides); });
  run.timings.rerank_ms = MsSince(rerank_start);
  run.timings.total_ms = MsSince(start);
  return run;
}

TuningInstance Pipeline::MakeTuningInstance(const TuningRecord& record) const {
  TuningInstance inst;
  inst.query = Expand(record.query_id, record.query_text);
  inst.candidates.query_id = record.query_id;
  for (std::size_t i = 0; i < record.candidate_ids.size(); ++i) {
    const auto& id = record.candidate_ids[i];
    inst.candidates.candidates.push_back(Candidate{state_->corpus.At(id), 0.0});
    inst.gold_ce[id] = record.gold_scores[i];
  }
  SortCandidates(inst.candidates);
  return inst;
}

std::vector<QueryRecord> LoadQueries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<QueryRecord> queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected query_id<TAB>text");
    }
    queries.push_back(QueryRecord{line.substr(0, tab), line.substr(tab + 1)});
  }
  return queries;
}

const PipelineConfig& Pipeline::config() const { return state_->config; }
const Corpus& Pipeline::corpus() const { return state_->corpus; }
const Bm25Index& Pipeline::index() const { return state_->index; }
const CeScorer& Pipeline::scorer() const { return *state_->scorer; }

}  // namespace flashrank
