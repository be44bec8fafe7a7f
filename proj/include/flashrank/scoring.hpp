#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flashrank/corpus.hpp"
#include "flashrank/query.hpp"

namespace flashrank {

/// Utility weights: Δ(d|S) = alpha*sim + beta*nov - gamma*len + delta*ce.
struct Coefficients {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.5;
  double delta = 0.0;

  void Validate() const;
  bool operator==(const Coefficients&) const = default;
};

struct UtilityComponents {
  double sim = 0.0;       // [-1, 1]
  double nov = 1.0;       // [0, 2]
  double len_norm = 0.0;  // >= 0
  double ce = 0.0;        // [0, 1]

  bool operator==(const UtilityComponents&) const = default;
};

enum class LengthMode { kNormalized, kRaw };

double WeightedGain(const Coefficients& c, const UtilityComponents& u);

/// Dot product of unit vectors, clamped to [-1, 1].
double Cosine(std::span<const double> a, std::span<const double> b);

double Sim(const ExpandedQuery& query, const Document& doc);

/// 1 - max_{s in selected} cos(doc, s); 1.0 when nothing is selected.
double Nov(const Document& doc, std::span<const Document* const> selected);

/// token_count / budget (or raw token_count).
double LenNorm(const Document& doc, std::size_t budget,
               LengthMode mode = LengthMode::kNormalized);

/// Cross-encoder evidence in [0, 1].
class CeScorer {
 public:
  virtual ~CeScorer() = default;
  virtual double Score(const ExpandedQuery& query, const Document& doc) const = 0;
  /// One score per document, same order. Backends that pay per round trip
  /// override this.
  virtual std::vector<double> ScoreBatch(const ExpandedQuery& query,
                                         std::span<const Document* const> docs) const;
};

/// Token-overlap F1 between q' terms and document tokens (multiset).
class LexicalStubCeScorer final : public CeScorer {
 public:
  double Score(const ExpandedQuery& query, const Document& doc) const override;
};

/// Lookup table loaded from `query_id TAB doc_id TAB score`, min-max
/// normalized per query at load. A query whose scores are all equal maps to
/// 1.0 throughout.
class PrecomputedCeScorer final : public CeScorer {
 public:
  static PrecomputedCeScorer Load(const std::filesystem::path& path);
  static PrecomputedCeScorer FromRaw(
      const std::unordered_map<std::string, std::unordered_map<std::string, double>>& raw);

  double Score(const ExpandedQuery& query, const Document& doc) const override;

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, double>> table_;
};

/// POSTs {"query", "passages": [{"id", "text"}]} and reads
/// {"scores": [{"id", "score"}]}; responses are clamped to [0, 1].
class RemoteCeScorer final : public CeScorer {
 public:
  RemoteCeScorer(std::string endpoint, std::string auth_token = {},
                 std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

  double Score(const ExpandedQuery& query, const Document& doc) const override;
  std::vector<double> ScoreBatch(const ExpandedQuery& query,
                                 std::span<const Document* const> docs) const override;

 private:
  std::string endpoint_;
  std::string token_;
  std::chrono::milliseconds timeout_;
};

double Ce(const ExpandedQuery& query, const Document& doc, const CeScorer& scorer);

UtilityComponents ComputeComponents(const Document& doc,
                                    std::span<const Document* const> selected,
                                    const ExpandedQuery& query, std::size_t budget,
                                    const CeScorer& scorer,
                                    LengthMode mode = LengthMode::kNormalized);

/// Δ(d|S). Only the novelty term depends on `selected`.
double MarginalUtility(const Document& doc, std::span<const Document* const> selected,
                       const ExpandedQuery& query, const Coefficients& coeffs,
                       std::size_t budget, const CeScorer& scorer,
                       LengthMode mode = LengthMode::kNormalized);

}  // namespace flashrank
