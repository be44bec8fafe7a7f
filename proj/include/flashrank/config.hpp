#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "flashrank/expansion.hpp"
#include "flashrank/retrieval.hpp"
#include "flashrank/scoring.hpp"
#include "flashrank/selection.hpp"

namespace flashrank {

enum class CeBackend { kPrecomputed, kRemote, kLexicalStub };

struct RemoteEndpoint {
  std::string url;
  std::string token;
  int timeout_ms = 5000;
};

struct PipelinePaths {
  std::filesystem::path corpus;
  std::filesystem::path embeddings;  // optional sidecar
  std::filesystem::path vocab;       // term vectors for expansion / query embedding
  std::filesystem::path ce_scores;   // precomputed cross-encoder TSV
  std::filesystem::path qrels;
  std::filesystem::path index;       // persisted BM25 index; built on the fly if unset
};

/// Every tunable of the pipeline.
///
/// Files use `key = value` lines with `#` comments; `[section]` headers
/// prefix the keys that follow (`[bm25]` then `k1 = 1.2` sets `bm25.k1`).
/// Relative paths resolve against the config file's directory. Each key can
/// be overridden by an environment variable named FLASHRANK_ followed by the
/// key upper-cased with dots as underscores (FLASHRANK_LLM_TOKEN).
struct PipelineConfig {
  PipelinePaths paths;
  ExpansionConfig expansion;
  SelectionConfig selection;
  Coefficients coeffs;
  std::size_t retrieval_n = 100;
  Bm25Params bm25;
  FusionConfig fusion;
  CeBackend ce_backend = CeBackend::kLexicalStub;
  RemoteEndpoint ce_remote;
  RemoteEndpoint llm;
  std::size_t max_inline_candidates = 256;

  /// Sets one key from its string form. Throws a validation error naming the
  /// key for unknown keys and unparsable values.
  void Set(const std::string& key, const std::string& value,
           const std::filesystem::path& base_dir = {});

  /// Numeric invariants, then existence of every referenced file.
  void Validate() const;

  /// Applies FLASHRANK_* overrides read through `getenv`.
  void ApplyEnvironment(const std::function<const char*(const char*)>& getenv_fn);

  static PipelineConfig Load(const std::filesystem::path& path);

  static const std::vector<std::string>& Keys();
};

std::string EnvVarFor(const std::string& key);

}  // namespace flashrank
