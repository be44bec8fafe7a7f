#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flashrank/config.hpp"
#include "flashrank/corpus.hpp"
#include "flashrank/evaluation.hpp"
#include "flashrank/expansion.hpp"
#include "flashrank/retrieval.hpp"
#include "flashrank/scoring.hpp"
#include "flashrank/selection.hpp"
#include "flashrank/tuning.hpp"

namespace flashrank {

inline constexpr const char* kDefaultQueryId = "q";

/// Per-request knobs. Coefficients are deliberately absent.
struct QueryOverrides {
  std::optional<std::size_t> budget;
  std::optional<double> tau;
};

struct PipelineRun {
  ExpandedQuery query;
  CandidateSet candidates;
  SelectionResult selection;
  StageTimings timings;
  std::vector<std::string> warnings;
};

/// expand -> hybrid retrieve -> greedy select, over immutable loaded state.
/// All const methods are safe to call concurrently.
class Pipeline {
 public:
  struct Parts {
    PipelineConfig config;
    Corpus corpus;
    std::optional<Bm25Index> index;  // built from the corpus when absent
    TermVectors vocab;
    std::unique_ptr<CeScorer> scorer;     // lexical stub when null
    std::unique_ptr<LlmClient> llm;
  };

  explicit Pipeline(Parts parts);

  /// Validates the config and loads every referenced file.
  static Pipeline FromConfig(const PipelineConfig& config);

  ExpandedQuery Expand(const std::string& query_id, const std::string& text,
                       std::vector<std::string>* warnings = nullptr) const;
  CandidateSet Retrieve(const ExpandedQuery& query) const;
  SelectionResult Select(const ExpandedQuery& query, const CandidateSet& candidates,
                         const QueryOverrides& overrides = {}) const;

  /// Full run with stage timings. Errors are re-thrown with the failing
  /// stage ("expand", "retrieve", "rerank") prefixed to the message.
  PipelineRun Run(const std::string& query_id, const std::string& text,
                  const QueryOverrides& overrides = {}) const;

  /// Rerank caller-supplied candidates instead of retrieving.
  PipelineRun RunWithCandidates(const std::string& query_id, const std::string& text,
                                CandidateSet candidates,
                                const QueryOverrides& overrides = {}) const;

  TuningInstance MakeTuningInstance(const TuningRecord& record) const;

  SelectionConfig EffectiveSelection(const QueryOverrides& overrides) const;

  const PipelineConfig& config() const;
  const Corpus& corpus() const;
  const Bm25Index& index() const;
  const CeScorer& scorer() const;

 private:
  struct State;
  std::shared_ptr<const State> state_;
};

std::unique_ptr<CeScorer> MakeCeScorer(const PipelineConfig& config);

struct QueryRecord {
  std::string id;
  std::string text;
};

/// Reads `query_id<TAB>text` lines, keeping file order.
std::vector<QueryRecord> LoadQueries(const std::filesystem::path& path);

}  // namespace flashrank
