#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flashrank/corpus.hpp"

namespace flashrank {

struct ScoredTerm {
  std::string term;
  double informativeness = 0.0;

  bool operator==(const ScoredTerm&) const = default;
};

/// q' = q ∪ Δq. Expansion terms are disjoint from the original terms.
struct ExpandedQuery {
  std::string query_id;
  std::string original_text;
  std::vector<std::string> original_terms;
  std::vector<ScoredTerm> expansion_terms;
  std::optional<Embedding> combined_embedding;

  /// Original terms followed by expansion terms (flat union, no weighting).
  std::vector<std::string> AllTerms() const {
    std::vector<std::string> terms = original_terms;
    for (const auto& t : expansion_terms) terms.push_back(t.term);
    return terms;
  }
};

}  // namespace flashrank
