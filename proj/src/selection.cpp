#include "flashrank/selection.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <limits>
#include <optional>
#include <sstream>

#include "flashrank/error.hpp"

namespace flashrank {

std::string_view ToString(StopReason reason) {
  switch (reason) {
    case StopReason::kThreshold:
      return "threshold";
    case StopReason::kBudgetExact:
      return "budget_exact";
    case StopReason::kOversizeBreak:
      return "oversize_break";
    case StopReason::kExhausted:
      return "exhausted";
  }
  return "exhausted";
}

std::string_view ToString(OversizePolicy policy) {
  return policy == OversizePolicy::kBreak ? "break" : "skip";
}

void SelectionConfig::Validate() const {
  if (budget_tokens < 1) throw ValidationError("selection.budget must be >= 1");
  if (std::isnan(tau)) throw ValidationError("selection.tau must be a number");
}

std::vector<std::string> SelectionResult::Ids() const {
  std::vector<std::string> ids;
  ids.reserve(selected.size());
  for (const auto& s : selected) ids.push_back(s.doc_id);
  return ids;
}

SelectionResult FlashRankSelect(const ExpandedQuery& query, const CandidateSet& candidates,
                                const Coefficients& coeffs, const SelectionConfig& config,
                                const CeScorer& scorer) {
  config.Validate();
  coeffs.Validate();

  SelectionResult result;
  result.query_id = query.query_id;
  const std::size_t n = candidates.size();
  if (n == 0) {
    result.stop_reason = StopReason::kExhausted;
    return result;
  }

  std::vector<const Document*> docs;
  docs.reserve(n);
  for (const auto& c : candidates.candidates) docs.push_back(&c.doc);

  std::vector<UtilityComponents> cached(n);
  for (std::size_t i = 0; i < n; ++i) {
    cached[i].sim = Sim(query, *docs[i]);
    cached[i].len_norm = LenNorm(*docs[i], config.budget_tokens, config.length_mode);
  }
  const auto ce = scorer.ScoreBatch(query, docs);
  for (std::size_t i = 0; i < n; ++i) cached[i].ce = ce[i];

  std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
  std::vector<bool> active(n, true);
  std::size_t remaining = n;
  bool any_selected = false;
  const std::size_t budget = config.budget_tokens;
  std::size_t total = 0;
  std::optional<StopReason> stop;

  while (total < budget && remaining > 0) {
    std::size_t best = n;
    double best_gain = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      cached[i].nov = any_selected ? 1.0 - max_sim[i] : 1.0;
      const double gain = WeightedGain(coeffs, cached[i]);
      if (best == n || gain > best_gain ||
          (gain == best_gain && docs[i]->id < docs[best]->id)) {
        best = i;
        best_gain = gain;
      }
    }

    if (best_gain < config.tau) {
      stop = StopReason::kThreshold;
      break;
    }
    const std::size_t len = docs[best]->token_count;
    if (total + len <= budget) {
      total += len;
      result.selected.push_back(SelectedStep{docs[best]->id, best_gain, len, total, cached[best]});
      active[best] = false;
      --remaining;
      any_selected = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        max_sim[i] = std::max(max_sim[i], Cosine(*docs[i]->embedding, *docs[best]->embedding));
      }
    } else if (config.oversize_policy == OversizePolicy::kBreak) {
      stop = StopReason::kOversizeBreak;
      break;
    } else {
      active[best] = false;
      --remaining;
    }
  }

  result.total_tokens = total;
  result.stop_reason = stop ? *stop : (total >= budget ? StopReason::kBudgetExact
                                                       : StopReason::kExhausted);
  return result;
}

std::string ExplainSelection(const SelectionResult& result, const Coefficients& coeffs) {
  std::ostringstream out;
  char line[256];
  out << "query: " << result.query_id << "\n";
  std::snprintf(line, sizeof line, "coefficients: alpha=%g beta=%g gamma=%g delta=%g\n",
                coeffs.alpha, coeffs.beta, coeffs.gamma, coeffs.delta);
  out << line;
  if (!result.selected.empty()) {
    std::snprintf(line, sizeof line, "%4s  %-20s %8s %8s %8s %8s %9s %7s %10s\n", "step",
                  "doc_id", "sim", "nov", "len", "ce", "gain", "tokens", "tokens_cum");
    out << line;
    for (std::size_t i = 0; i < result.selected.size(); ++i) {
      const auto& s = result.selected[i];
      const auto& u = s.components;
      std::snprintf(line, sizeof line, "%4zu  %-20s %8.4f %8.4f %8.4f %8.4f %9.4f %7zu %10zu\n",
                    i + 1, s.doc_id.c_str(), u.sim, u.nov, u.len_norm, u.ce, s.gain, s.tokens,
                    s.tokens_cum);
      out << line;
    }
  }
  out << "total_tokens: " << result.total_tokens << "\n";
  out << "stop_reason: " << ToString(result.stop_reason) << "\n";
  return out.str();
}

}  // namespace flashrank
