#include "flashrank/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "flashrank/error.hpp"
#include "flashrank/retrieval.hpp"
#include "http_post.hpp"

namespace flashrank {

namespace {

bool ByScoreThenTerm(const ScoredTerm& a, const ScoredTerm& b) {
  if (a.informativeness != b.informativeness) return a.informativeness > b.informativeness;
  return a.term < b.term;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  return std::clamp(Dot(a, b), -1.0, 1.0);
}

// Splits on newlines and commas; trims whitespace and list decoration.
std::vector<std::string> SplitCompletion(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    const auto first = current.find_first_not_of(" \t\r-*\"'");
    const auto last = current.find_last_not_of(" \t\r.\"'");
    if (first != std::string::npos && last != std::string::npos && last >= first) {
      out.push_back(current.substr(first, last - first + 1));
    }
    current.clear();
  };
  for (char c : text) {
    if (c == '\n' || c == ',') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

void ExpansionConfig::Validate() const {
  if (m < 1) throw ValidationError("expansion.m must be >= 1");
  if (!(query_weight > 0.0 && query_weight <= 1.0)) {
    throw ValidationError("expansion.query_weight must be in (0, 1]");
  }
  if (!std::isfinite(phi)) throw ValidationError("expansion.phi must be finite");
  if (pool < 1) throw ValidationError("expansion.pool must be >= 1");
}

TermVectors LoadTermVectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TermVectors vocab;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw IoError(where + ": malformed JSON (line " + std::to_string(line_no) + ")");
    }
    if (!obj.is_object() || !obj.contains("term") || !obj["term"].is_string() ||
        !obj.contains("embedding") || !obj["embedding"].is_array()) {
      throw IoError(where + ": expected fields \"term\" and \"embedding\"");
    }
    Embedding v;
    for (const auto& x : obj["embedding"]) {
      if (!x.is_number()) throw IoError(where + ": embedding entries must be numbers");
      v.push_back(x.get<double>());
    }
    if (dim && *dim != v.size()) throw ValidationError(where + ": embedding dimension mismatch");
    dim = v.size();
    const auto tokens = Tokenize(obj["term"].get<std::string>());
    if (tokens.size() != 1) {
      throw ValidationError(where + ": vocabulary term must be a single token");
    }
    try {
      vocab[tokens.front()] = Normalized(v);
    } catch (const Error&) {
      throw ValidationError(where + ": zero-norm embedding for term \"" + tokens.front() + "\"");
    }
  }
  return vocab;
}

std::optional<Embedding> QueryEmbedding(std::span<const std::string> terms,
                                        const TermVectors& vocab) {
  std::optional<Embedding> sum;
  for (const auto& t : terms) {
    auto it = vocab.find(t);
    if (it == vocab.end()) continue;
    if (!sum) {
      sum = it->second;
    } else {
      for (std::size_t i = 0; i < sum->size(); ++i) (*sum)[i] += it->second[i];
    }
  }
  if (!sum) return std::nullopt;
  try {
    return Normalized(*sum);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<ScoredTerm> ProposeTermsEmbedding(const std::string& query,
                                              const TermVectors& vocab,
                                              std::size_t pool) {
  const auto terms = Tokenize(query);
  const auto qv = QueryEmbedding(terms, vocab);
  if (!qv) {
    throw ValidationError("query \"" + query + "\" is not embeddable: no term is in the vocabulary");
  }
  const std::set<std::string> own(terms.begin(), terms.end());
  std::vector<ScoredTerm> out;
  for (const auto& [term, vec] : vocab) {
    if (own.contains(term)) continue;
    out.push_back(ScoredTerm{term, Cosine(vec, *qv)});
  }
  std::sort(out.begin(), out.end(), ByScoreThenTerm);
  if (out.size() > pool) out.resize(pool);
  return out;
}

HttpLlmClient::HttpLlmClient(std::string endpoint, std::string auth_token,
                             std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), token_(std::move(auth_token)), timeout_(timeout) {}

std::string HttpLlmClient::Complete(const std::string& prompt, std::size_t max_terms) const {
  const nlohmann::json body = {{"prompt", prompt}, {"max_terms", max_terms}};
  return detail::PostJson(endpoint_, body.dump(), token_, timeout_);
}

std::string RenderPrompt(const std::string& tmpl, const std::string& query,
                         std::size_t max_terms) {
  std::string out = tmpl;
  auto replace = [&out](const std::string& key, const std::string& value) {
    for (auto pos = out.find(key); pos != std::string::npos;
         pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  replace("{query}", query);
  replace("{max_terms}", std::to_string(max_terms));
  return out;
}

LlmProposal ProposeTermsLlm(const std::string& query, const LlmClient& client,
                            const ExpansionConfig& config, const TermVectors* vocab) {
  LlmProposal proposal;
  const std::string body =
      client.Complete(RenderPrompt(config.prompt_template, query, config.m), config.m);

  std::vector<std::string> raw;
  const auto parsed = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (!parsed.is_discarded() && parsed.is_object()) {
    if (!parsed.contains("terms") || !parsed["terms"].is_array()) {
      proposal.warnings.push_back("LLM response has no \"terms\" array; ignoring it");
      return proposal;
    }
    for (const auto& t : parsed["terms"]) {
      if (!t.is_string()) continue;
      for (auto& piece : SplitCompletion(t.get<std::string>())) raw.push_back(std::move(piece));
    }
  } else if (!parsed.is_discarded() && !parsed.is_string()) {
    proposal.warnings.push_back("LLM response is not a term list; ignoring it");
    return proposal;
  } else {
    raw = SplitCompletion(parsed.is_string() ? parsed.get<std::string>() : body);
  }
  if (raw.empty()) {
    proposal.warnings.push_back("LLM returned no terms");
    return proposal;
  }

  const auto query_terms = Tokenize(query);
  const std::set<std::string> own(query_terms.begin(), query_terms.end());
  std::optional<Embedding> qv;
  if (vocab) qv = QueryEmbedding(query_terms, *vocab);

  for (const auto& entry : raw) {
    const auto tokens = Tokenize(entry);
    if (tokens.size() != 1) continue;
    const auto& term = tokens.front();
    if (own.contains(term)) continue;
    double score = 1.0;
    if (vocab && qv) {
      if (auto it = vocab->find(term); it != vocab->end()) score = Cosine(it->second, *qv);
    }
    proposal.terms.push_back(ScoredTerm{term, score});
  }
  return proposal;
}

std::vector<ScoredTerm> FilterTerms(std::vector<ScoredTerm> candidates,
                                    const ExpansionConfig& config) {
  std::unordered_map<std::string, double> best;
  for (const auto& c : candidates) {
    auto [it, inserted] = best.emplace(c.term, c.informativeness);
    if (!inserted) it->second = std::max(it->second, c.informativeness);
  }
  std::vector<ScoredTerm> out;
  for (const auto& [term, score] : best) {
    if (score >= config.phi) out.push_back(ScoredTerm{term, score});
  }
  std::sort(out.begin(), out.end(), ByScoreThenTerm);
  if (out.size() > config.m) out.resize(config.m);
  return out;
}

std::vector<ScoredTerm> ApplyIdfWeighting(std::vector<ScoredTerm> terms,
                                          const Bm25Index& index) {
  const double n = static_cast<double>(index.doc_count());
  const double max_idf = std::log(1.0 + (n - 1.0 + 0.5) / (1.0 + 0.5));
  for (auto& t : terms) {
    t.informativeness *= max_idf > 0.0 ? index.Idf(t.term) / max_idf : 0.0;
  }
  return terms;
}

ExpandedQuery BuildExpandedQuery(const std::string& query_id, const std::string& query,
                                 const std::vector<ScoredTerm>& terms,
                                 const TermVectors& vocab,
                                 const ExpansionConfig& config) {
  ExpandedQuery eq;
  eq.query_id = query_id;
  eq.original_text = query;
  eq.original_terms = Tokenize(query);
  const std::set<std::string> own(eq.original_terms.begin(), eq.original_terms.end());
  for (const auto& t : terms) {
    if (!own.contains(t.term)) eq.expansion_terms.push_back(t);
  }

  const auto qv = QueryEmbedding(eq.original_terms, vocab);
  if (!qv) return eq;

  std::optional<Embedding> mean;
  std::size_t count = 0;
  for (const auto& t : eq.expansion_terms) {
    auto it = vocab.find(t.term);
    if (it == vocab.end()) continue;
    if (!mean) {
      mean = it->second;
    } else {
      for (std::size_t i = 0; i < mean->size(); ++i) (*mean)[i] += it->second[i];
    }
    ++count;
  }
  if (!mean || config.query_weight == 1.0) {
    eq.combined_embedding = qv;
    return eq;
  }
  Embedding mix(qv->size());
  const double w = config.query_weight;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    mix[i] = w * (*qv)[i] + (1.0 - w) * (*mean)[i] / static_cast<double>(count);
  }
  try {
    eq.combined_embedding = Normalized(mix);
  } catch (const Error&) {
    eq.combined_embedding = qv;
  }
  return eq;
}

QueryExpander::QueryExpander(ExpansionConfig config, const TermVectors* vocab,
                             const LlmClient* llm, const Bm25Index* idf_index)
    : config_(std::move(config)), vocab_(vocab), llm_(llm), idf_index_(idf_index) {
  config_.Validate();
}

ExpandedQuery QueryExpander::Expand(const std::string& query_id, const std::string& query,
                                    std::vector<std::string>* warnings) const {
  auto warn = [warnings](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };
  std::vector<ScoredTerm> pool;
  const bool use_embedding = config_.backend != ExpansionBackend::kRemoteLlm;
  const bool use_llm = config_.backend != ExpansionBackend::kEmbedding;

  if (use_embedding && vocab_) {
    try {
      pool = ProposeTermsEmbedding(query, *vocab_, config_.pool);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kValidation) throw;
      warn(e.what());
    }
  }
  if (use_llm) {
    if (!llm_) {
      warn("LLM expansion requested but no LLM endpoint is configured");
    } else {
      auto proposal = ProposeTermsLlm(query, *llm_, config_, vocab_);
      for (auto& w : proposal.warnings) warn(std::move(w));
      pool.insert(pool.end(), proposal.terms.begin(), proposal.terms.end());
    }
  }
  if (config_.idf_weighting && idf_index_) pool = ApplyIdfWeighting(std::move(pool), *idf_index_);

  static const TermVectors kEmpty;
  return BuildExpandedQuery(query_id, query, FilterTerms(std::move(pool), config_),
                            vocab_ ? *vocab_ : kEmpty, config_);
}

}  // namespace flashrank
