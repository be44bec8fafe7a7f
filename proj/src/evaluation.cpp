#include "flashrank/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "flashrank/error.hpp"

namespace flashrank {

namespace {

double Gain(int grade, GainMode mode) {
  return mode == GainMode::kLinear ? static_cast<double>(grade)
                                   : std::exp2(static_cast<double>(grade)) - 1.0;
}

double Discount(std::size_t rank_1_based) {
  return std::log2(static_cast<double>(rank_1_based) + 1.0);
}

template <typename PerQuery>
MetricReport Evaluate(const RunFile& run, const Qrels& qrels, PerQuery per_query) {
  MetricReport report;
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& [qid, ranking] : run.runs()) {
    const auto* judged = qrels.ForQuery(qid);
    if (!judged) {
      report.missing_from_qrels.push_back(qid);
      continue;
    }
    const bool any_relevant =
        std::any_of(judged->begin(), judged->end(), [](const auto& kv) { return kv.second >= 1; });
    const double value = any_relevant ? per_query(ranking, *judged) : 0.0;
    if (!any_relevant) report.no_relevant.push_back(qid);
    report.per_query[qid] = value;
    sum += value;
    ++counted;
  }
  report.mean = counted ? sum / static_cast<double>(counted) : 0.0;
  return report;
}

}  // namespace

void Qrels::Add(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) {
    throw ValidationError("negative relevance grade for (" + query_id + ", " + doc_id + ")");
  }
  if (!judgments_[query_id].emplace(doc_id, grade).second) {
    throw ValidationError("duplicate judgment for (" + query_id + ", " + doc_id + ")");
  }
}

const std::map<std::string, int>* Qrels::ForQuery(const std::string& query_id) const {
  auto it = judgments_.find(query_id);
  return it == judgments_.end() ? nullptr : &it->second;
}

Qrels Qrels::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, iter, doc;
    long grade = 0;
    if (!(fields >> qid)) continue;
    if (!(fields >> iter >> doc >> grade)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected `query_id 0 doc_id grade`");
    }
    try {
      qrels.Add(qid, doc, static_cast<int>(grade));
    } catch (const Error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return qrels;
}

void RunFile::Append(const std::string& query_id, const std::string& doc_id, double score) {
  auto& list = runs_[query_id];
  if (!list.empty() && score > list.back().second) {
    throw ValidationError("run scores must be non-increasing in rank for query " + query_id);
  }
  for (const auto& [id, s] : list) {
    if (id == doc_id) {
      throw ValidationError("duplicate doc \"" + doc_id + "\" in run for query " + query_id);
    }
  }
  list.emplace_back(doc_id, score);
}

RunFile RunFile::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  struct Row {
    std::string doc;
    long rank;
    double score;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, q0, doc, tag;
    Row row{};
    if (!(fields >> qid)) continue;
    if (!(fields >> q0 >> doc >> row.rank >> row.score)) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected `query_id Q0 doc_id rank score tag`");
    }
    row.doc = doc;
    rows[qid].push_back(std::move(row));
  }
  RunFile run;
  for (auto& [qid, list] : rows) {
    std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.rank < b.rank;
    });
    for (const auto& r : list) run.Append(qid, r.doc, r.score);
  }
  return run;
}

void RunFile::Write(std::ostream& out, const std::string& tag) const {
  const auto precision = out.precision(10);
  for (const auto& [qid, list] : runs_) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      out << qid << " Q0 " << list[i].first << ' ' << (i + 1) << ' ' << list[i].second << ' '
          << tag << '\n';
    }
  }
  out.precision(precision);
}

MetricReport NdcgAtK(const RunFile& run, const Qrels& qrels, std::size_t k, GainMode gain) {
  if (k < 1) throw ValidationError("k must be >= 1");
  return Evaluate(run, qrels, [&](const auto& ranking, const std::map<std::string, int>& judged) {
    double dcg = 0.0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
      auto it = judged.find(ranking[i].first);
      if (it != judged.end() && it->second > 0) dcg += Gain(it->second, gain) / Discount(i + 1);
    }
    std::vector<int> ideal;
    for (const auto& [doc, grade] : judged) ideal.push_back(grade);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
      if (ideal[i] > 0) idcg += Gain(ideal[i], gain) / Discount(i + 1);
    }
    return idcg > 0.0 ? dcg / idcg : 0.0;
  });
}

MetricReport RecallAtK(const RunFile& run, const Qrels& qrels, std::size_t k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  return Evaluate(run, qrels, [&](const auto& ranking, const std::map<std::string, int>& judged) {
    std::size_t relevant = 0;
    for (const auto& [doc, grade] : judged) relevant += grade >= 1 ? 1 : 0;
    std::size_t found = 0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
      auto it = judged.find(ranking[i].first);
      if (it != judged.end() && it->second >= 1) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(relevant);
  });
}

TokenReport MakeTokenReport(std::span<const SelectionResult> selections) {
  if (selections.empty()) throw ValidationError("token report needs at least one selection");
  std::vector<std::size_t> totals;
  totals.reserve(selections.size());
  for (const auto& s : selections) totals.push_back(s.total_tokens);
  std::sort(totals.begin(), totals.end());
  TokenReport report;
  double sum = 0.0;
  for (auto t : totals) sum += static_cast<double>(t);
  report.mean = sum / static_cast<double>(totals.size());
  const std::size_t mid = totals.size() / 2;
  report.median = totals.size() % 2 == 1
                      ? static_cast<double>(totals[mid])
                      : (static_cast<double>(totals[mid - 1]) + static_cast<double>(totals[mid])) / 2.0;
  report.max = totals.back();
  return report;
}

LatencySummary Summarize(std::vector<double> samples) {
  LatencySummary s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double x : samples) sum += x;
  s.mean_ms = sum / static_cast<double>(samples.size());
  auto rank = [&](double p) {
    const auto idx = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(idx, 1, samples.size()) - 1];
  };
  s.p50_ms = rank(50.0);
  s.p95_ms = rank(95.0);
  return s;
}

BenchReport BenchRerank(const std::function<StageTimings(std::size_t)>& run_query,
                        std::size_t query_count, const BenchConfig& config) {
  if (query_count == 0) throw ValidationError("benchmark needs at least one query");
  if (config.repetitions < 1) throw ValidationError("bench.repetitions must be >= 1");
  for (std::size_t w = 0; w < config.warmup; ++w) {
    for (std::size_t q = 0; q < query_count; ++q) run_query(q);
  }
  std::vector<double> rerank, retrieve_rerank, total;
  for (std::size_t r = 0; r < config.repetitions; ++r) {
    for (std::size_t q = 0; q < query_count; ++q) {
      const StageTimings t = run_query(q);
      rerank.push_back(t.rerank_ms);
      retrieve_rerank.push_back(t.retrieve_ms + t.rerank_ms);
      total.push_back(t.total_ms);
    }
  }
  BenchReport report;
  report.samples = total.size();
  report.rerank = Summarize(std::move(rerank));
  report.retrieve_rerank = Summarize(std::move(retrieve_rerank));
  report.total = Summarize(std::move(total));
  return report;
}

void WriteRecallCostCsv(std::ostream& out, std::span<const RecallCostPoint> points) {
  out << "budget,mean_tokens,mean_recall\n";
  for (const auto& p : points) {
    out << p.budget << ',' << p.mean_tokens << ',' << p.mean_recall << '\n';
  }
}

}  // namespace flashrank
