#include "flashrank/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "flashrank/error.hpp"

namespace flashrank {

namespace {

constexpr const char* kIndexFormat = "flashrank.bm25";
constexpr int kIndexVersion = 1;

bool ScoreThenId(const std::pair<std::string, double>& a,
                 const std::pair<std::string, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

void KeepTop(std::vector<std::pair<std::string, double>>& list, std::size_t n) {
  if (list.size() > n) {
    std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n),
                      list.end(), ScoreThenId);
    list.resize(n);
  } else {
    std::sort(list.begin(), list.end(), ScoreThenId);
  }
}

std::unordered_map<std::string, double> MinMax(
    const std::vector<std::pair<std::string, double>>& list) {
  std::unordered_map<std::string, double> out;
  if (list.empty()) return out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [id, s] : list) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (const auto& [id, s] : list) {
    out[id] = hi > lo ? (s - lo) / (hi - lo) : 1.0;
  }
  return out;
}

}  // namespace

Bm25Index Bm25Index::Build(const Corpus& corpus, Bm25Params params) {
  if (corpus.empty()) throw ValidationError("cannot build BM25 index over an empty corpus");
  Bm25Index index;
  index.params_ = params;
  for (const auto& doc : corpus.documents()) {
    const auto tokens = Tokenize(doc.text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) {
      index.postings_[term].push_back(Posting{doc.id, count});
    }
    index.doc_ids_.push_back(doc.id);
    index.doc_lengths_.push_back(tokens.size());
  }
  index.Finalize();
  return index;
}

void Bm25Index::Finalize() {
  doc_index_.clear();
  double total = 0.0;
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    doc_index_.emplace(doc_ids_[i], i);
    total += static_cast<double>(doc_lengths_[i]);
  }
  avg_doc_length_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
  for (auto& [term, list] : postings_) {
    std::sort(list.begin(), list.end(),
              [](const Posting& a, const Posting& b) { return a.doc_id < b.doc_id; });
  }
}

double Bm25Index::Idf(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return 0.0;
  const double n = static_cast<double>(doc_ids_.size());
  const double df = static_cast<double>(it->second.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::size_t Bm25Index::DocLength(std::string_view doc_id) const {
  auto it = doc_index_.find(std::string(doc_id));
  if (it == doc_index_.end()) {
    throw ValidationError("document \"" + std::string(doc_id) + "\" is not in the index");
  }
  return doc_lengths_[it->second];
}

std::uint32_t Bm25Index::TermFrequency(std::string_view term,
                                       std::string_view doc_id) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return 0;
  const auto& list = it->second;
  auto pos = std::lower_bound(
      list.begin(), list.end(), doc_id,
      [](const Posting& p, std::string_view id) { return p.doc_id < id; });
  return (pos != list.end() && pos->doc_id == doc_id) ? pos->tf : 0;
}

double Bm25Index::Score(std::span<const std::string> terms,
                        std::string_view doc_id) const {
  const double dl = static_cast<double>(DocLength(doc_id));
  double score = 0.0;
  for (const auto& term : terms) {
    const double tf = TermFrequency(term, doc_id);
    if (tf == 0.0) continue;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * dl / avg_doc_length_);
    score += Idf(term) * tf * (params_.k1 + 1.0) / (tf + norm);
  }
  return score;
}

std::vector<std::pair<std::string, double>> Bm25Index::TopN(
    std::span<const std::string> terms, std::size_t n) const {
  std::unordered_map<std::string, double> acc;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double idf = Idf(term);
    for (const auto& p : it->second) {
      const double dl = static_cast<double>(doc_lengths_[doc_index_.at(p.doc_id)]);
      const double tf = p.tf;
      const double norm = params_.k1 * (1.0 - params_.b + params_.b * dl / avg_doc_length_);
      acc[p.doc_id] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
    }
  }
  std::vector<std::pair<std::string, double>> list(acc.begin(), acc.end());
  KeepTop(list, n);
  return list;
}

std::string Bm25Index::Serialize() const {
  nlohmann::ordered_json j;
  j["format"] = kIndexFormat;
  j["version"] = kIndexVersion;
  j["k1"] = params_.k1;
  j["b"] = params_.b;
  auto docs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    docs.push_back({doc_ids_[i], doc_lengths_[i]});
  }
  j["documents"] = std::move(docs);
  nlohmann::ordered_json postings = nlohmann::ordered_json::object();
  for (const auto& [term, list] : postings_) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : list) arr.push_back({p.doc_id, p.tf});
    postings[term] = std::move(arr);
  }
  j["postings"] = std::move(postings);
  return j.dump() + "\n";
}

Bm25Index Bm25Index::Deserialize(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("malformed index file: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kIndexFormat) {
    throw IoError("not a BM25 index file");
  }
  if (j.value("version", 0) != kIndexVersion) {
    throw IoError("unsupported index version " + j["version"].dump());
  }
  Bm25Index index;
  try {
    index.params_.k1 = j.at("k1").get<double>();
    index.params_.b = j.at("b").get<double>();
    for (const auto& entry : j.at("documents")) {
      index.doc_ids_.push_back(entry.at(0).get<std::string>());
      index.doc_lengths_.push_back(entry.at(1).get<std::size_t>());
    }
    for (const auto& [term, arr] : j.at("postings").items()) {
      auto& list = index.postings_[term];
      for (const auto& p : arr) {
        list.push_back(Posting{p.at(0).get<std::string>(), p.at(1).get<std::uint32_t>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed index file: ") + e.what());
  }
  if (index.doc_ids_.empty()) throw IoError("index file has no documents");
  index.Finalize();
  if (index.doc_index_.size() != index.doc_ids_.size()) {
    throw IoError("index file has duplicate document ids");
  }
  for (const auto& [term, list] : index.postings_) {
    for (const auto& p : list) {
      if (!index.doc_index_.contains(p.doc_id)) {
        throw IoError("posting for \"" + term + "\" references unknown document \"" +
                      p.doc_id + "\"");
      }
    }
  }
  return index;
}

void Bm25Index::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << Serialize();
  if (!out) throw IoError("write failed for " + path.string());
}

Bm25Index Bm25Index::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Deserialize(buf.str());
}

std::vector<std::pair<std::string, double>> DenseScores(
    std::span<const double> query_embedding, const Corpus& corpus) {
  if (corpus.embedding_dim() && *corpus.embedding_dim() != query_embedding.size()) {
    throw ValidationError("query embedding dimension " +
                          std::to_string(query_embedding.size()) +
                          " does not match corpus dimension " +
                          std::to_string(*corpus.embedding_dim()));
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& doc : corpus.documents()) {
    if (!doc.embedding) continue;
    const double c = std::clamp(Dot(query_embedding, *doc.embedding), -1.0, 1.0);
    out.emplace_back(doc.id, c);
  }
  return out;
}

void SortCandidates(CandidateSet& set) {
  std::unordered_set<std::string> seen;
  for (const auto& c : set.candidates) {
    if (!seen.insert(c.doc.id).second) {
      throw ValidationError("duplicate candidate id \"" + c.doc.id + "\"");
    }
  }
  std::sort(set.candidates.begin(), set.candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.doc.id < b.doc.id;
            });
}

CandidateSet HybridRetrieve(const ExpandedQuery& query, const Bm25Index& index,
                            const Corpus& corpus, std::size_t n,
                            const FusionConfig& fusion) {
  if (n < 1) throw ValidationError("retrieval.n must be >= 1");
  const auto terms = query.AllTerms();
  auto lexical = index.TopN(terms, n);
  std::vector<std::pair<std::string, double>> dense;
  if (query.combined_embedding) {
    dense = DenseScores(*query.combined_embedding, corpus);
    KeepTop(dense, n);
  }

  std::unordered_map<std::string, double> fused;
  if (fusion.mode == FusionMode::kRrf) {
    for (const auto* list : {&lexical, &dense}) {
      for (std::size_t r = 0; r < list->size(); ++r) {
        fused[(*list)[r].first] += 1.0 / (fusion.rrf_k + static_cast<double>(r + 1));
      }
    }
  } else {
    const auto lex_norm = MinMax(lexical);
    const auto dense_norm = MinMax(dense);
    for (const auto& [id, s] : lex_norm) fused[id] += (1.0 - fusion.dense_weight) * s;
    for (const auto& [id, s] : dense_norm) fused[id] += fusion.dense_weight * s;
  }

  std::vector<std::pair<std::string, double>> ranked(fused.begin(), fused.end());
  KeepTop(ranked, n);

  CandidateSet set;
  set.query_id = query.query_id;
  set.candidates.reserve(ranked.size());
  for (const auto& [id, score] : ranked) {
    set.candidates.push_back(Candidate{corpus.At(id), score});
  }
  return set;
}

}  // namespace flashrank
