#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "flashrank/query.hpp"
#include "flashrank/retrieval.hpp"
#include "flashrank/scoring.hpp"

namespace flashrank {

struct TuningInstance {
  ExpandedQuery query;
  CandidateSet candidates;
  std::unordered_map<std::string, double> gold_ce;  // covers every candidate
};

/// Per-coefficient value lists; the search walks their cross product with
/// alpha as the outermost loop.
struct GridSpec {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
  std::vector<double> delta;

  /// {0, 0.25, 0.5, 1, 2} for every coefficient.
  static GridSpec Default();
  std::size_t size() const;
  void Validate() const;
};

struct GridResult {
  Coefficients best;
  double mean_loss = 0.0;
  std::size_t grid_size = 0;
};

/// H(g, p) with p = softmax of the first-step utilities Δ(d|∅) and
/// g = softmax of the gold cross-encoder scores, both at temperature 1.
double ListwiseLoss(const TuningInstance& instance, const Coefficients& coeffs,
                    std::size_t budget, const CeScorer& scorer,
                    LengthMode mode = LengthMode::kNormalized);

/// Entropy of softmax(gold); the lower bound of ListwiseLoss.
double GoldEntropy(const TuningInstance& instance);

/// Exhaustive argmin of the mean listwise loss. Ties keep the earliest grid
/// point.
GridResult GridSearch(const std::vector<TuningInstance>& instances, const GridSpec& grid,
                      std::size_t budget, const CeScorer& scorer,
                      LengthMode mode = LengthMode::kNormalized);

/// One line of a tuning input file.
struct TuningRecord {
  std::string query_id;
  std::string query_text;
  std::vector<std::string> candidate_ids;
  std::vector<double> gold_scores;  // parallel to candidate_ids
};

/// Reads `{"query_id", "query_text", "candidate_ids", "gold_scores"}` lines.
std::vector<TuningRecord> LoadTuningRecords(const std::filesystem::path& path);

}  // namespace flashrank
