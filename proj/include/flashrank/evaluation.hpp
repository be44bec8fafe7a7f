#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flashrank/selection.hpp"

namespace flashrank {

/// Graded judgments, TREC format `query_id 0 doc_id grade`.
class Qrels {
 public:
  static Qrels Load(const std::filesystem::path& path);

  /// Throws on a negative grade or a repeated (query, doc) pair.
  void Add(const std::string& query_id, const std::string& doc_id, int grade);

  const std::map<std::string, int>* ForQuery(const std::string& query_id) const;
  const std::map<std::string, std::map<std::string, int>>& judgments() const {
    return judgments_;
  }

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

/// Ranked output per query, TREC format `query_id Q0 doc_id rank score tag`.
class RunFile {
 public:
  static RunFile Load(const std::filesystem::path& path);

  /// Appends at the next rank. Throws if the doc id repeats within the query
  /// or the score exceeds the previous one.
  void Append(const std::string& query_id, const std::string& doc_id, double score);

  void Write(std::ostream& out, const std::string& tag) const;

  const std::map<std::string, std::vector<std::pair<std::string, double>>>& runs() const {
    return runs_;
  }

 private:
  std::map<std::string, std::vector<std::pair<std::string, double>>> runs_;
};

enum class GainMode {
  kExponential,  // 2^rel - 1
  kLinear,       // rel
};

struct MetricReport {
  std::map<std::string, double> per_query;
  double mean = 0.0;
  // Present in the run but not in the qrels: excluded from the mean.
  std::vector<std::string> missing_from_qrels;
  // Judged but with no relevant document: scored 0 and counted in the mean.
  std::vector<std::string> no_relevant;
};

MetricReport NdcgAtK(const RunFile& run, const Qrels& qrels, std::size_t k,
                     GainMode gain = GainMode::kExponential);

/// Relevant means grade >= 1.
MetricReport RecallAtK(const RunFile& run, const Qrels& qrels, std::size_t k);

struct TokenReport {
  double mean = 0.0;
  double median = 0.0;
  std::size_t max = 0;
};

TokenReport MakeTokenReport(std::span<const SelectionResult> selections);

struct StageTimings {
  double expand_ms = 0.0;
  double retrieve_ms = 0.0;
  double rerank_ms = 0.0;
  double total_ms = 0.0;
};

struct LatencySummary {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

/// Nearest-rank percentiles.
LatencySummary Summarize(std::vector<double> samples_ms);

struct BenchConfig {
  std::size_t repetitions = 5;
  std::size_t warmup = 1;  // untimed passes over the whole query list
};

struct BenchReport {
  std::size_t samples = 0;
  LatencySummary rerank;
  LatencySummary retrieve_rerank;
  LatencySummary total;
};

/// Calls `run_query(i)` for every query index, `repetitions` times after
/// `warmup` discarded passes. The callee reports its own stage timings.
BenchReport BenchRerank(const std::function<StageTimings(std::size_t)>& run_query,
                        std::size_t query_count, const BenchConfig& config);

struct RecallCostPoint {
  std::size_t budget = 0;
  double mean_tokens = 0.0;
  double mean_recall = 0.0;
};

void WriteRecallCostCsv(std::ostream& out, std::span<const RecallCostPoint> points);

}  // namespace flashrank
