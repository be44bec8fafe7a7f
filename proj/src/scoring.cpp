#include "flashrank/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "flashrank/error.hpp"
#include "http_post.hpp"

namespace flashrank {

void Coefficients::Validate() const {
  const std::pair<const char*, double> fields[] = {
      {"coeffs.alpha", alpha}, {"coeffs.beta", beta}, {"coeffs.gamma", gamma}, {"coeffs.delta", delta}};
  for (const auto& [key, value] : fields) {
    if (!std::isfinite(value) || value < 0.0) {
      throw ValidationError(std::string(key) + " must be finite and >= 0");
    }
  }
}

double WeightedGain(const Coefficients& c, const UtilityComponents& u) {
  return c.alpha * u.sim + c.beta * u.nov - c.gamma * u.len_norm + c.delta * u.ce;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("embedding dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  return std::clamp(Dot(a, b), -1.0, 1.0);
}

double Sim(const ExpandedQuery& query, const Document& doc) {
  if (!query.combined_embedding) {
    throw ValidationError("query \"" + query.query_id + "\" has no embedding");
  }
  if (!doc.embedding) throw ValidationError("document \"" + doc.id + "\" has no embedding");
  return Cosine(*query.combined_embedding, *doc.embedding);
}

double Nov(const Document& doc, std::span<const Document* const> selected) {
  if (!doc.embedding) throw ValidationError("document \"" + doc.id + "\" has no embedding");
  if (selected.empty()) return 1.0;
  double max_sim = -std::numeric_limits<double>::infinity();
  for (const Document* s : selected) {
    if (!s->embedding) throw ValidationError("document \"" + s->id + "\" has no embedding");
    max_sim = std::max(max_sim, Cosine(*doc.embedding, *s->embedding));
  }
  return 1.0 - max_sim;
}

double LenNorm(const Document& doc, std::size_t budget, LengthMode mode) {
  if (budget < 1) throw ValidationError("selection.budget must be >= 1");
  const double tokens = static_cast<double>(doc.token_count);
  return mode == LengthMode::kRaw ? tokens : tokens / static_cast<double>(budget);
}

std::vector<double> CeScorer::ScoreBatch(const ExpandedQuery& query,
                                         std::span<const Document* const> docs) const {
  std::vector<double> out;
  out.reserve(docs.size());
  for (const Document* d : docs) out.push_back(Score(query, *d));
  return out;
}

double LexicalStubCeScorer::Score(const ExpandedQuery& query, const Document& doc) const {
  std::unordered_map<std::string, std::size_t> q_counts;
  std::size_t q_total = 0;
  for (const auto& t : query.AllTerms()) {
    ++q_counts[t];
    ++q_total;
  }
  const auto doc_tokens = Tokenize(doc.text);
  if (q_total == 0 || doc_tokens.empty()) return 0.0;
  std::size_t overlap = 0;
  for (const auto& t : doc_tokens) {
    auto it = q_counts.find(t);
    if (it != q_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(doc_tokens.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(q_total);
  return 2.0 * precision * recall / (precision + recall);
}

PrecomputedCeScorer PrecomputedCeScorer::FromRaw(
    const std::unordered_map<std::string, std::unordered_map<std::string, double>>& raw) {
  PrecomputedCeScorer scorer;
  for (const auto& [qid, docs] : raw) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& [id, s] : docs) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    auto& row = scorer.table_[qid];
    for (const auto& [id, s] : docs) row[id] = hi > lo ? (s - lo) / (hi - lo) : 1.0;
  }
  return scorer;
}

PrecomputedCeScorer PrecomputedCeScorer::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::unordered_map<std::string, std::unordered_map<std::string, double>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected query_id<TAB>doc_id<TAB>score");
    }
    double score = 0.0;
    try {
      std::size_t used = 0;
      const std::string field = line.substr(t2 + 1);
      score = std::stod(field, &used);
      if (used != field.size() || !std::isfinite(score)) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": invalid score");
    }
    raw[line.substr(0, t1)][line.substr(t1 + 1, t2 - t1 - 1)] = score;
  }
  return FromRaw(raw);
}

double PrecomputedCeScorer::Score(const ExpandedQuery& query, const Document& doc) const {
  auto q = table_.find(query.query_id);
  if (q != table_.end()) {
    auto d = q->second.find(doc.id);
    if (d != q->second.end()) return d->second;
  }
  throw ValidationError("no cross-encoder score for pair (" + query.query_id + ", " +
                        doc.id + ")");
}

RemoteCeScorer::RemoteCeScorer(std::string endpoint, std::string auth_token,
                               std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), token_(std::move(auth_token)), timeout_(timeout) {}

double RemoteCeScorer::Score(const ExpandedQuery& query, const Document& doc) const {
  const Document* one[] = {&doc};
  return ScoreBatch(query, one).front();
}

std::vector<double> RemoteCeScorer::ScoreBatch(const ExpandedQuery& query,
                                               std::span<const Document* const> docs) const {
  nlohmann::json body;
  body["query"] = query.original_text;
  body["passages"] = nlohmann::json::array();
  for (const Document* d : docs) body["passages"].push_back({{"id", d->id}, {"text", d->text}});

  const std::string response = detail::PostJson(endpoint_, body.dump(), token_, timeout_);
  std::unordered_map<std::string, double> by_id;
  try {
    const auto j = nlohmann::json::parse(response);
    for (const auto& entry : j.at("scores")) {
      by_id[entry.at("id").get<std::string>()] = entry.at("score").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError("malformed response from " + endpoint_ + ": " + e.what());
  }
  std::vector<double> out;
  out.reserve(docs.size());
  for (const Document* d : docs) {
    auto it = by_id.find(d->id);
    if (it == by_id.end()) {
      throw RemoteError(endpoint_ + " returned no score for \"" + d->id + "\"");
    }
    out.push_back(std::isfinite(it->second) ? std::clamp(it->second, 0.0, 1.0) : 0.0);
  }
  return out;
}

double Ce(const ExpandedQuery& query, const Document& doc, const CeScorer& scorer) {
  return scorer.Score(query, doc);
}

UtilityComponents ComputeComponents(const Document& doc,
                                    std::span<const Document* const> selected,
                                    const ExpandedQuery& query, std::size_t budget,
                                    const CeScorer& scorer, LengthMode mode) {
  UtilityComponents u;
  u.sim = Sim(query, doc);
  u.nov = Nov(doc, selected);
  u.len_norm = LenNorm(doc, budget, mode);
  u.ce = Ce(query, doc, scorer);
  return u;
}

double MarginalUtility(const Document& doc, std::span<const Document* const> selected,
                       const ExpandedQuery& query, const Coefficients& coeffs,
                       std::size_t budget, const CeScorer& scorer, LengthMode mode) {
  return WeightedGain(coeffs, ComputeComponents(doc, selected, query, budget, scorer, mode));
}

}  // namespace flashrank
