#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "flashrank/query.hpp"
#include "flashrank/retrieval.hpp"
#include "flashrank/scoring.hpp"

namespace flashrank {

/// What to do when the best remaining candidate does not fit the budget.
enum class OversizePolicy {
  kBreak,  // stop, as the greedy loop is written
  kSkip,   // drop that candidate and keep going
};

enum class StopReason { kThreshold, kBudgetExact, kOversizeBreak, kExhausted };

std::string_view ToString(StopReason reason);
std::string_view ToString(OversizePolicy policy);

struct SelectionConfig {
  std::size_t budget_tokens = 1000;
  double tau = 0.0;
  OversizePolicy oversize_policy = OversizePolicy::kBreak;
  LengthMode length_mode = LengthMode::kNormalized;

  void Validate() const;
};

struct SelectedStep {
  std::string doc_id;
  double gain = 0.0;
  std::size_t tokens = 0;
  std::size_t tokens_cum = 0;
  UtilityComponents components;
};

struct SelectionResult {
  std::string query_id;
  std::vector<SelectedStep> selected;
  std::size_t total_tokens = 0;
  StopReason stop_reason = StopReason::kExhausted;

  std::vector<std::string> Ids() const;
};

/// Greedy marginal-utility selection under a hard token budget.
///
/// Each round picks argmax Δ(d|S) over the remaining candidates (ties go to
/// the smaller doc id). The round stops the loop if that gain is below tau;
/// otherwise the document is accepted when it fits, and when it does not the
/// oversize policy decides. The loop runs while T < B and candidates remain.
///
/// sim, len and ce are computed once per candidate; only the running max
/// similarity behind nov is updated per accepted document.
SelectionResult FlashRankSelect(const ExpandedQuery& query, const CandidateSet& candidates,
                                const Coefficients& coeffs, const SelectionConfig& config,
                                const CeScorer& scorer);

/// Plain-text per-step table of the recorded components and the stop reason.
std::string ExplainSelection(const SelectionResult& result, const Coefficients& coeffs);

}  // namespace flashrank
