#pragma once

#include <string>

#include <json.hpp>

#include "flashrank/evaluation.hpp"
#include "flashrank/query.hpp"
#include "flashrank/retrieval.hpp"
#include "flashrank/selection.hpp"
#include "flashrank/tuning.hpp"

namespace flashrank {

using OrderedJson = nlohmann::ordered_json;

/// {"query_id", "selected": [{"doc_id", "gain", "tokens_cum"}], "total_tokens",
/// "stop_reason"}. The CLI and the service both emit exactly this.
OrderedJson ToJson(const SelectionResult& result);
std::string SelectionJson(const SelectionResult& result);

OrderedJson ToJson(const ExpandedQuery& query);
OrderedJson ToJson(const CandidateSet& candidates);
OrderedJson ToJson(const GridResult& result);
OrderedJson ToJson(const BenchReport& report);
OrderedJson ToJson(const TokenReport& report);
OrderedJson ToJson(const MetricReport& report);

/// Inverse of ToJson(SelectionResult); components are not recorded there and
/// come back zeroed.
SelectionResult SelectionFromJson(const nlohmann::json& j);

}  // namespace flashrank
