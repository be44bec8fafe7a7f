#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flashrank/corpus.hpp"
#include "flashrank/query.hpp"

namespace flashrank {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  bool operator==(const Bm25Params&) const = default;
};

struct Posting {
  std::string doc_id;
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

/// Okapi BM25 inverted index. Postings are kept sorted by doc id so lookups
/// can binary-search and persistence is order-stable.
class Bm25Index {
 public:
  static Bm25Index Build(const Corpus& corpus, Bm25Params params = {});

  /// Sum over `terms` of idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)).
  /// Terms absent from the index contribute 0.
  double Score(std::span<const std::string> terms, std::string_view doc_id) const;

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); 0 for unknown terms.
  double Idf(std::string_view term) const;

  /// Documents matching at least one term, best first (ties by doc id), at
  /// most `n` of them.
  std::vector<std::pair<std::string, double>> TopN(
      std::span<const std::string> terms, std::size_t n) const;

  std::size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  const Bm25Params& params() const { return params_; }
  const std::map<std::string, std::vector<Posting>>& postings() const {
    return postings_;
  }
  std::size_t DocLength(std::string_view doc_id) const;
  std::uint32_t TermFrequency(std::string_view term, std::string_view doc_id) const;

  /// Versioned JSON; Save(Load(Save(x))) is byte-identical to Save(x).
  void Save(const std::filesystem::path& path) const;
  std::string Serialize() const;
  static Bm25Index Load(const std::filesystem::path& path);
  static Bm25Index Deserialize(std::string_view text);

  bool operator==(const Bm25Index&) const = default;

 private:
  void Finalize();

  Bm25Params params_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::vector<std::string> doc_ids_;  // corpus order
  std::vector<std::size_t> doc_lengths_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  double avg_doc_length_ = 0.0;
};

/// Exact cosine against every embedded document, in corpus order. Documents
/// without embeddings are skipped.
std::vector<std::pair<std::string, double>> DenseScores(
    std::span<const double> query_embedding, const Corpus& corpus);

enum class FusionMode { kRrf, kWeighted };

struct FusionConfig {
  FusionMode mode = FusionMode::kRrf;
  double rrf_k = 60.0;
  // Weighted mode: fused = (1 - w) * minmax(bm25) + w * minmax(dense).
  double dense_weight = 0.5;
};

struct Candidate {
  Document doc;
  double score = 0.0;
};

/// Sorted by score descending, ties by ascending doc id, duplicate free.
struct CandidateSet {
  std::string query_id;
  std::vector<Candidate> candidates;

  std::size_t size() const { return candidates.size(); }
  bool empty() const { return candidates.empty(); }
};

/// Sorts in place by (score desc, id asc). Throws on duplicate ids.
void SortCandidates(CandidateSet& set);

/// Top-n BM25 (original + expansion terms) and top-n dense lists, fused and
/// cut to n.
CandidateSet HybridRetrieve(const ExpandedQuery& query, const Bm25Index& index,
                            const Corpus& corpus, std::size_t n,
                            const FusionConfig& fusion = {});

}  // namespace flashrank
