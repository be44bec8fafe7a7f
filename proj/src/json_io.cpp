#include "flashrank/json_io.hpp"

#include "flashrank/error.hpp"

namespace flashrank {

OrderedJson ToJson(const SelectionResult& result) {
  OrderedJson j;
  j["query_id"] = result.query_id;
  auto selected = OrderedJson::array();
  for (const auto& s : result.selected) {
    OrderedJson step;
    step["doc_id"] = s.doc_id;
    step["gain"] = s.gain;
    step["tokens_cum"] = s.tokens_cum;
    selected.push_back(std::move(step));
  }
  j["selected"] = std::move(selected);
  j["total_tokens"] = result.total_tokens;
  j["stop_reason"] = std::string(ToString(result.stop_reason));
  return j;
}

std::string SelectionJson(const SelectionResult& result) { return ToJson(result).dump(); }

OrderedJson ToJson(const ExpandedQuery& query) {
  OrderedJson j;
  j["query_id"] = query.query_id;
  j["query"] = query.original_text;
  j["original_terms"] = query.original_terms;
  auto terms = OrderedJson::array();
  for (const auto& t : query.expansion_terms) {
    OrderedJson e;
    e["term"] = t.term;
    e["informativeness"] = t.informativeness;
    terms.push_back(std::move(e));
  }
  j["expansion_terms"] = std::move(terms);
  j["combined_embedding"] =
      query.combined_embedding ? OrderedJson(*query.combined_embedding) : OrderedJson(nullptr);
  return j;
}

OrderedJson ToJson(const CandidateSet& candidates) {
  OrderedJson j;
  j["query_id"] = candidates.query_id;
  auto list = OrderedJson::array();
  for (const auto& c : candidates.candidates) {
    OrderedJson e;
    e["doc_id"] = c.doc.id;
    e["score"] = c.score;
    e["tokens"] = c.doc.token_count;
    list.push_back(std::move(e));
  }
  j["candidates"] = std::move(list);
  return j;
}

OrderedJson ToJson(const GridResult& result) {
  OrderedJson j;
  j["alpha"] = result.best.alpha;
  j["beta"] = result.best.beta;
  j["gamma"] = result.best.gamma;
  j["delta"] = result.best.delta;
  j["mean_loss"] = result.mean_loss;
  j["grid_size"] = result.grid_size;
  return j;
}

namespace {

OrderedJson ToJson(const LatencySummary& s) {
  OrderedJson j;
  j["mean_ms"] = s.mean_ms;
  j["p50_ms"] = s.p50_ms;
  j["p95_ms"] = s.p95_ms;
  return j;
}

}  // namespace

OrderedJson ToJson(const BenchReport& report) {
  OrderedJson j;
  j["samples"] = report.samples;
  j["rerank"] = ToJson(report.rerank);
  j["retrieve_rerank"] = ToJson(report.retrieve_rerank);
  j["total"] = ToJson(report.total);
  return j;
}

OrderedJson ToJson(const TokenReport& report) {
  OrderedJson j;
  j["mean"] = report.mean;
  j["median"] = report.median;
  j["max"] = report.max;
  return j;
}

OrderedJson ToJson(const MetricReport& report) {
  OrderedJson j;
  j["mean"] = report.mean;
  OrderedJson per_query = OrderedJson::object();
  for (const auto& [qid, v] : report.per_query) per_query[qid] = v;
  j["per_query"] = std::move(per_query);
  j["missing_from_qrels"] = report.missing_from_qrels;
  j["no_relevant"] = report.no_relevant;
  return j;
}

SelectionResult SelectionFromJson(const nlohmann::json& j) {
  SelectionResult r;
  try {
    r.query_id = j.at("query_id").get<std::string>();
    std::size_t prev = 0;
    for (const auto& s : j.at("selected")) {
      SelectedStep step;
      step.doc_id = s.at("doc_id").get<std::string>();
      step.gain = s.at("gain").get<double>();
      step.tokens_cum = s.at("tokens_cum").get<std::size_t>();
      step.tokens = step.tokens_cum - prev;
      prev = step.tokens_cum;
      r.selected.push_back(std::move(step));
    }
    r.total_tokens = j.at("total_tokens").get<std::size_t>();
    const auto reason = j.at("stop_reason").get<std::string>();
    if (reason == "threshold") r.stop_reason = StopReason::kThreshold;
    else if (reason == "budget_exact") r.stop_reason = StopReason::kBudgetExact;
    else if (reason == "oversize_break") r.stop_reason = StopReason::kOversizeBreak;
    else if (reason == "exhausted") r.stop_reason = StopReason::kExhausted;
    else throw ValidationError("unknown stop_reason \"" + reason + "\"");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed selection JSON: ") + e.what());
  }
  return r;
}

}  // namespace flashrank
