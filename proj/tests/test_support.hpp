#pragma once

// Test-only generators and the naive reference selector. Nothing here is
// linked into the library.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "flashrank/corpus.hpp"
#include "flashrank/query.hpp"
#include "flashrank/retrieval.hpp"
#include "flashrank/scoring.hpp"
#include "flashrank/selection.hpp"

namespace flashrank::testing {

inline std::string DataPath(const std::string& name) {
  return std::string(FLASHRANK_TEST_DATA) + "/" + name;
}

inline Embedding RandomUnit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Embedding v(dim);
  double norm = 0.0;
  do {
    for (auto& x : v) x = normal(rng);
    norm = std::sqrt(Dot(v, v));
  } while (norm < 1e-9);
  for (auto& x : v) x /= norm;
  return v;
}

inline const std::vector<std::string>& Words() {
  static const std::vector<std::string> words = {
      "revenue", "earnings", "margin", "cash",   "flow",  "debt",  "equity",
      "risk",    "esg",      "audit",  "filing", "asset", "loss",  "growth",
      "market",  "rate",     "bond",   "yield",  "tax",   "price"};
  return words;
}

/// Text with exactly `tokens` tokens drawn from Words().
inline std::string RandomText(std::mt19937_64& rng, std::size_t tokens) {
  std::uniform_int_distribution<std::size_t> pick(0, Words().size() - 1);
  std::string text;
  for (std::size_t i = 0; i < tokens; ++i) {
    if (i) text.push_back(' ');
    text += Words()[pick(rng)];
  }
  return text;
}

struct RandomInstance {
  ExpandedQuery query;
  CandidateSet candidates;
  Coefficients coeffs;
  SelectionConfig config;
};

/// N candidates with random unit embeddings, 50..800 tokens, random
/// coefficients, budget and threshold. About one in four instances plants an
/// exact duplicate of another candidate under a different id to force ties.
inline RandomInstance MakeRandomInstance(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  RandomInstance inst;
  std::uniform_int_distribution<std::size_t> tokens(50, 800);
  std::uniform_real_distribution<double> coeff(0.0, 2.0);
  std::uniform_real_distribution<double> tau(-0.5, 1.5);
  std::uniform_int_distribution<std::size_t> budget(100, 3000);
  std::uniform_int_distribution<std::size_t> qlen(1, 4);

  inst.query.query_id = "rq";
  const std::size_t ql = qlen(rng);
  std::uniform_int_distribution<std::size_t> pick(0, Words().size() - 1);
  for (std::size_t i = 0; i < ql; ++i) inst.query.original_terms.push_back(Words()[pick(rng)]);
  inst.query.original_text = inst.query.original_terms.front();
  inst.query.combined_embedding = RandomUnit(rng, dim);

  inst.candidates.query_id = "rq";
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "doc%02zu", i);
    inst.candidates.candidates.push_back(
        Candidate{MakeDocument(id, RandomText(rng, tokens(rng)), RandomUnit(rng, dim)), 0.0});
  }
  if (n >= 2 && std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
    Document copy = inst.candidates.candidates[0].doc;
    copy.id = "dup" + copy.id;
    inst.candidates.candidates.back().doc = std::move(copy);
  }
  SortCandidates(inst.candidates);

  inst.coeffs = Coefficients{coeff(rng), coeff(rng), coeff(rng), coeff(rng)};
  inst.config.budget_tokens = budget(rng);
  inst.config.tau = tau(rng);
  inst.config.oversize_policy = std::uniform_int_distribution<int>(0, 3)(rng) == 0
                                    ? OversizePolicy::kSkip
                                    : OversizePolicy::kBreak;
  return inst;
}

struct OracleTrace {
  std::vector<std::string> ids;
  std::vector<double> gains;
  std::size_t total_tokens = 0;
  StopReason reason = StopReason::kExhausted;
};

/// Literal greedy loop: every round recomputes Δ(d|S) for every remaining
/// candidate from the scoring module's component functions.
inline OracleTrace NaiveSelect(const ExpandedQuery& query, const CandidateSet& candidates,
                               const Coefficients& coeffs, const SelectionConfig& config,
                               const CeScorer& scorer) {
  OracleTrace trace;
  std::vector<const Document*> remaining;
  for (const auto& c : candidates.candidates) remaining.push_back(&c.doc);
  std::vector<const Document*> selected;
  const std::size_t budget = config.budget_tokens;
  while (trace.total_tokens < budget && !remaining.empty()) {
    std::size_t best = 0;
    double best_gain = 0.0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const double gain = MarginalUtility(*remaining[i], selected, query, coeffs, budget, scorer,
                                          config.length_mode);
      if (i == 0 || gain > best_gain ||
          (gain == best_gain && remaining[i]->id < remaining[best]->id)) {
        best = i;
        best_gain = gain;
      }
    }
    if (best_gain < config.tau) {
      trace.reason = StopReason::kThreshold;
      return trace;
    }
    const Document* d = remaining[best];
    if (trace.total_tokens + d->token_count <= budget) {
      selected.push_back(d);
      trace.ids.push_back(d->id);
      trace.gains.push_back(best_gain);
      trace.total_tokens += d->token_count;
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    } else if (config.oversize_policy == OversizePolicy::kBreak) {
      trace.reason = StopReason::kOversizeBreak;
      return trace;
    } else {
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }
  }
  trace.reason = trace.total_tokens >= budget ? StopReason::kBudgetExact : StopReason::kExhausted;
  return trace;
}

inline bool IsPrefix(const std::vector<std::string>& prefix, const std::vector<std::string>& full) {
  return prefix.size() <= full.size() && std::equal(prefix.begin(), prefix.end(), full.begin());
}

}  // namespace flashrank::testing
