#include "flashrank/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "flashrank/error.hpp"

namespace flashrank {

namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out = s.substr(first, last - first + 1);
  if (out.size() >= 2 && ((out.front() == '"' && out.back() == '"') ||
                          (out.front() == '\'' && out.back() == '\''))) {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  if (value == "inf" || value == "+inf") return INFINITY;
  if (value == "-inf") return -INFINITY;
  throw ValidationError(key + ": expected a number, got \"" + value + "\"");
}

std::size_t ParseSize(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError(key + ": expected an integer, got \"" + value + "\"");
  }
  if (v < 0) throw ValidationError(key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ValidationError(key + ": expected true/false, got \"" + value + "\"");
}

std::filesystem::path ParsePath(const std::string& value, const std::filesystem::path& base) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  return (p.is_relative() && !base.empty()) ? base / p : p;
}

void RequireFile(const std::string& key, const std::filesystem::path& p) {
  if (!p.empty() && !std::filesystem::exists(p)) {
    throw ValidationError(key + ": file not found: " + p.string());
  }
}

}  // namespace

const std::vector<std::string>& PipelineConfig::Keys() {
  static const std::vector<std::string> keys = {
      "paths.corpus",         "paths.embeddings",      "paths.vocab",
      "paths.ce_scores",      "paths.qrels",           "paths.index",
      "expansion.m",          "expansion.phi",         "expansion.backend",
      "expansion.query_weight", "expansion.pool",      "expansion.idf_weighting",
      "expansion.prompt_template",
      "selection.budget",     "selection.tau",         "selection.oversize_policy",
      "selection.length_mode",
      "coeffs.alpha",         "coeffs.beta",           "coeffs.gamma",
      "coeffs.delta",
      "retrieval.n",          "bm25.k1",               "bm25.b",
      "fusion.mode",          "fusion.rrf_k",          "fusion.dense_weight",
      "ce.backend",           "ce.endpoint",           "ce.token",
      "ce.timeout_ms",        "llm.endpoint",          "llm.token",
      "llm.timeout_ms",       "service.max_candidates",
  };
  return keys;
}

std::string EnvVarFor(const std::string& key) {
  std::string name = "FLASHRANK_";
  for (char c : key) {
    name.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return name;
}

void PipelineConfig::Set(const std::string& key, const std::string& raw,
                         const std::filesystem::path& base) {
  const std::string value = Trim(raw);
  if (key == "paths.corpus") paths.corpus = ParsePath(value, base);
  else if (key == "paths.embeddings") paths.embeddings = ParsePath(value, base);
  else if (key == "paths.vocab") paths.vocab = ParsePath(value, base);
  else if (key == "paths.ce_scores") paths.ce_scores = ParsePath(value, base);
  else if (key == "paths.qrels") paths.qrels = ParsePath(value, base);
  else if (key == "paths.index") paths.index = ParsePath(value, base);
  else if (key == "expansion.m") expansion.m = ParseSize(key, value);
  else if (key == "expansion.phi") expansion.phi = ParseDouble(key, value);
  else if (key == "expansion.query_weight") expansion.query_weight = ParseDouble(key, value);
  else if (key == "expansion.pool") expansion.pool = ParseSize(key, value);
  else if (key == "expansion.idf_weighting") expansion.idf_weighting = ParseBool(key, value);
  else if (key == "expansion.prompt_template") expansion.prompt_template = value;
  else if (key == "expansion.backend") {
    if (value == "embedding") expansion.backend = ExpansionBackend::kEmbedding;
    else if (value == "remote_llm") expansion.backend = ExpansionBackend::kRemoteLlm;
    else if (value == "both") expansion.backend = ExpansionBackend::kBoth;
    else throw ValidationError(key + ": expected embedding|remote_llm|both, got \"" + value + "\"");
  } else if (key == "selection.budget") selection.budget_tokens = ParseSize(key, value);
  else if (key == "selection.tau") selection.tau = ParseDouble(key, value);
  else if (key == "selection.oversize_policy") {
    if (value == "break") selection.oversize_policy = OversizePolicy::kBreak;
    else if (value == "skip") selection.oversize_policy = OversizePolicy::kSkip;
    else throw ValidationError(key + ": expected break|skip, got \"" + value + "\"");
  } else if (key == "selection.length_mode") {
    if (value == "normalized") selection.length_mode = LengthMode::kNormalized;
    else if (value == "raw") selection.length_mode = LengthMode::kRaw;
    else throw ValidationError(key + ": expected normalized|raw, got \"" + value + "\"");
  } else if (key == "coeffs.alpha") coeffs.alpha = ParseDouble(key, value);
  else if (key == "coeffs.beta") coeffs.beta = ParseDouble(key, value);
  else if (key == "coeffs.gamma") coeffs.gamma = ParseDouble(key, value);
  else if (key == "coeffs.delta") coeffs.delta = ParseDouble(key, value);
  else if (key == "retrieval.n") retrieval_n = ParseSize(key, value);
  else if (key == "bm25.k1") bm25.k1 = ParseDouble(key, value);
  else if (key == "bm25.b") bm25.b = ParseDouble(key, value);
  else if (key == "fusion.mode") {
    if (value == "rrf") fusion.mode = FusionMode::kRrf;
    else if (value == "weighted") fusion.mode = FusionMode::kWeighted;
    else throw ValidationError(key + ": expected rrf|weighted, got \"" + value + "\"");
  } else if (key == "fusion.rrf_k") fusion.rrf_k = ParseDouble(key, value);
  else if (key == "fusion.dense_weight") fusion.dense_weight = ParseDouble(key, value);
  else if (key == "ce.backend") {
    if (value == "precomputed") ce_backend = CeBackend::kPrecomputed;
    else if (value == "remote") ce_backend = CeBackend::kRemote;
    else if (value == "lexical_stub") ce_backend = CeBackend::kLexicalStub;
    else throw ValidationError(key + ": expected precomputed|remote|lexical_stub, got \"" + value + "\"");
  } else if (key == "ce.endpoint") ce_remote.url = value;
  else if (key == "ce.token") ce_remote.token = value;
  else if (key == "ce.timeout_ms") ce_remote.timeout_ms = static_cast<int>(ParseSize(key, value));
  else if (key == "llm.endpoint") llm.url = value;
  else if (key == "llm.token") llm.token = value;
  else if (key == "llm.timeout_ms") llm.timeout_ms = static_cast<int>(ParseSize(key, value));
  else if (key == "service.max_candidates") max_inline_candidates = ParseSize(key, value);
  else throw ValidationError("unknown config key \"" + key + "\"");
}

void PipelineConfig::Validate() const {
  expansion.Validate();
  selection.Validate();
  coeffs.Validate();
  if (retrieval_n < 1) throw ValidationError("retrieval.n must be >= 1");
  if (!(bm25.k1 >= 0.0) || !std::isfinite(bm25.k1)) throw ValidationError("bm25.k1 must be >= 0");
  if (!(bm25.b >= 0.0 && bm25.b <= 1.0)) throw ValidationError("bm25.b must be in [0, 1]");
  if (!(fusion.rrf_k >= 0.0) || !std::isfinite(fusion.rrf_k)) {
    throw ValidationError("fusion.rrf_k must be >= 0");
  }
  if (!(fusion.dense_weight >= 0.0 && fusion.dense_weight <= 1.0)) {
    throw ValidationError("fusion.dense_weight must be in [0, 1]");
  }
  if (max_inline_candidates < 1) throw ValidationError("service.max_candidates must be >= 1");
  if (ce_backend == CeBackend::kPrecomputed && paths.ce_scores.empty()) {
    throw ValidationError("paths.ce_scores is required when ce.backend = precomputed");
  }
  if (ce_backend == CeBackend::kRemote && ce_remote.url.empty()) {
    throw ValidationError("ce.endpoint is required when ce.backend = remote");
  }
  if (expansion.backend != ExpansionBackend::kEmbedding && llm.url.empty()) {
    throw ValidationError("llm.endpoint is required when expansion.backend uses the LLM");
  }
  RequireFile("paths.corpus", paths.corpus);
  RequireFile("paths.embeddings", paths.embeddings);
  RequireFile("paths.vocab", paths.vocab);
  RequireFile("paths.ce_scores", paths.ce_scores);
  RequireFile("paths.qrels", paths.qrels);
}

void PipelineConfig::ApplyEnvironment(
    const std::function<const char*(const char*)>& getenv_fn) {
  for (const auto& key : Keys()) {
    if (const char* v = getenv_fn(EnvVarFor(key).c_str())) Set(key, v);
  }
}

PipelineConfig PipelineConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  PipelineConfig config;
  const auto base = path.parent_path();
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      // A '#' inside a quoted value is kept.
      const auto quote = line.find('"');
      if (quote == std::string::npos || hash < quote) line.erase(hash);
    }
    const std::string trimmed = Trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '[' && trimmed.back() == ']') {
      section = Trim(trimmed.substr(1, trimmed.size() - 2));
      continue;
    }
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected `key = value`");
    }
    std::string key = Trim(trimmed.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    config.Set(key, trimmed.substr(eq + 1), base);
  }
  return config;
}

}  // namespace flashrank
