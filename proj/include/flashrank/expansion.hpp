#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flashrank/corpus.hpp"
#include "flashrank/query.hpp"

namespace flashrank {

class Bm25Index;

/// Unit-norm term vectors keyed by token. Ordered so that iteration (and with
/// it every tie) is deterministic.
using TermVectors = std::map<std::string, Embedding>;

/// Reads `{"term", "embedding"}` JSON lines, normalizing each vector.
TermVectors LoadTermVectors(const std::filesystem::path& path);

enum class ExpansionBackend { kEmbedding, kRemoteLlm, kBoth };

struct ExpansionConfig {
  std::size_t m = 5;
  double phi = 0.5;
  ExpansionBackend backend = ExpansionBackend::kEmbedding;
  double query_weight = 0.7;
  // Candidate pool drawn from the vocabulary before filtering.
  std::size_t pool = 50;
  // Multiply informativeness by idf(t) / max idf from the BM25 index.
  bool idf_weighting = false;
  std::string prompt_template =
      "List up to {max_terms} single-word synonyms or closely related search "
      "terms for the query below, one per line.\nQuery: {query}";

  /// Throws a validation error naming the offending key.
  void Validate() const;
};

/// Mean of the in-vocabulary term vectors, renormalized. nullopt when no term
/// is in the vocabulary or the mean vanishes.
std::optional<Embedding> QueryEmbedding(std::span<const std::string> terms,
                                        const TermVectors& vocab);

/// Vocabulary terms ranked by cosine to the query vector, excluding the
/// query's own terms. Throws if the query is not embeddable.
std::vector<ScoredTerm> ProposeTermsEmbedding(const std::string& query,
                                              const TermVectors& vocab,
                                              std::size_t pool);

/// Remote text-completion backend. Implementations must tolerate concurrent
/// calls.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Returns the raw completion body. Throws a remote error on transport
  /// failure.
  virtual std::string Complete(const std::string& prompt, std::size_t max_terms) const = 0;
};

/// POSTs {"prompt", "max_terms"} and expects {"terms": [...]} back.
class HttpLlmClient final : public LlmClient {
 public:
  HttpLlmClient(std::string endpoint, std::string auth_token = {},
                std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
  std::string Complete(const std::string& prompt, std::size_t max_terms) const override;

 private:
  std::string endpoint_;
  std::string token_;
  std::chrono::milliseconds timeout_;
};

struct LlmProposal {
  std::vector<ScoredTerm> terms;
  std::vector<std::string> warnings;
};

std::string RenderPrompt(const std::string& tmpl, const std::string& query,
                         std::size_t max_terms);

/// Parses the completion (a {"terms": [...]} object, or plain text separated by
/// newlines or commas). Entries that are not exactly one token are dropped.
/// Each surviving term is scored by cosine to the query when both have
/// vectors, otherwise 1.0.
LlmProposal ProposeTermsLlm(const std::string& query, const LlmClient& client,
                            const ExpansionConfig& config,
                            const TermVectors* vocab = nullptr);

/// Dedup (keep higher score), drop < phi, sort by score desc then term, cut
/// to m.
std::vector<ScoredTerm> FilterTerms(std::vector<ScoredTerm> candidates,
                                    const ExpansionConfig& config);

/// Rescales informativeness by idf(t) / max attainable idf of `index`.
std::vector<ScoredTerm> ApplyIdfWeighting(std::vector<ScoredTerm> terms,
                                          const Bm25Index& index);

/// combined = normalize(w * v_q + (1 - w) * mean(v_terms)); v_q alone when
/// no expansion term has a vector; absent when the query has none.
ExpandedQuery BuildExpandedQuery(const std::string& query_id, const std::string& query,
                                 const std::vector<ScoredTerm>& terms,
                                 const TermVectors& vocab,
                                 const ExpansionConfig& config);

/// Runs the configured backends end to end. Any of the pointers may be null;
/// a backend whose input is missing contributes nothing.
class QueryExpander {
 public:
  QueryExpander(ExpansionConfig config, const TermVectors* vocab,
                const LlmClient* llm = nullptr, const Bm25Index* idf_index = nullptr);

  ExpandedQuery Expand(const std::string& query_id, const std::string& query,
                       std::vector<std::string>* warnings = nullptr) const;

  const ExpansionConfig& config() const { return config_; }

 private:
  ExpansionConfig config_;
  const TermVectors* vocab_;
  const LlmClient* llm_;
  const Bm25Index* idf_index_;
};

}  // namespace flashrank
