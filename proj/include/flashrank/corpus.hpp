#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace flashrank {

using Embedding = std::vector<double>;

double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> v);

/// Returns v / |v|. Throws a validation error for a zero (or non-finite) norm.
Embedding Normalized(std::span<const double> v);

/// Token accounting used for every budget in the engine. Implementations must
/// be deterministic and safe to call concurrently.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> Tokenize(std::string_view text) const = 0;
};

/// Lowercases ASCII and splits on every non-alphanumeric byte. Bytes >= 0x80
/// are kept inside tokens so UTF-8 words survive intact.
class SimpleTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> Tokenize(std::string_view text) const override;
};

const Tokenizer& DefaultTokenizer();

/// Shorthand for DefaultTokenizer().Tokenize(text).
std::vector<std::string> Tokenize(std::string_view text);

struct Document {
  std::string id;
  std::string text;
  std::size_t token_count = 0;
  std::optional<Embedding> embedding;

  bool operator==(const Document&) const = default;
};

/// Builds a document, counting tokens with `tokenizer` and unit-normalizing
/// the embedding if one is given.
Document MakeDocument(std::string id, std::string text,
                      std::optional<Embedding> embedding = std::nullopt,
                      const Tokenizer& tokenizer = DefaultTokenizer());

/// Ordered, id-keyed document collection. Immutable once built; share by const
/// reference across threads.
class Corpus {
 public:
  Corpus() = default;

  /// Appends a document. Rejects duplicate or empty ids and embeddings whose
  /// dimension differs from those already stored.
  void Add(Document doc);

  /// Attaches (or replaces) the embedding of an existing document.
  void SetEmbedding(std::string_view id, Embedding unit_embedding);

  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  std::optional<std::size_t> embedding_dim() const { return embedding_dim_; }

  const Document* Find(std::string_view id) const;
  const Document& At(std::string_view id) const;

  bool operator==(const Corpus& other) const {
    return documents_ == other.documents_ &&
           embedding_dim_ == other.embedding_dim_;
  }

 private:
  void CheckDim(std::size_t dim, std::string_view id);

  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::optional<std::size_t> embedding_dim_;
};

/// Reads `{"id", "text", "embedding"?}` JSON lines. Blank lines are skipped.
Corpus IngestJsonl(const std::filesystem::path& path,
                   const Tokenizer& tokenizer = DefaultTokenizer());

/// Reads `{"id", "embedding"}` JSON lines and returns a copy of `corpus` with
/// those embeddings attached. Documents not listed keep their current state.
Corpus LoadEmbeddings(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace flashrank
