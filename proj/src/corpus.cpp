#include "flashrank/corpus.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "flashrank/error.hpp"

namespace flashrank {

namespace {

bool IsTokenByte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

Embedding ParseVector(const nlohmann::json& value, const std::string& where) {
  if (!value.is_array()) {
    throw ValidationError(where + ": \"embedding\" must be an array");
  }
  Embedding out;
  out.reserve(value.size());
  for (const auto& x : value) {
    if (!x.is_number()) {
      throw ValidationError(where + ": embedding entries must be numbers");
    }
    out.push_back(x.get<double>());
  }
  if (out.empty()) {
    throw ValidationError(where + ": embedding is empty");
  }
  return out;
}

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return in;
}

}  // namespace

double Dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

Embedding Normalized(std::span<const double> v) {
  const double norm = Norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("embedding has zero or non-finite norm");
  }
  Embedding out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

std::vector<std::string> SimpleTokenizer::Tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsTokenByte(c)) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                               : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

const Tokenizer& DefaultTokenizer() {
  static const SimpleTokenizer tokenizer;
  return tokenizer;
}

std::vector<std::string> Tokenize(std::string_view text) {
  return DefaultTokenizer().Tokenize(text);
}

Document MakeDocument(std::string id, std::string text,
                      std::optional<Embedding> embedding,
                      const Tokenizer& tokenizer) {
  Document doc;
  doc.token_count = tokenizer.Tokenize(text).size();
  doc.id = std::move(id);
  doc.text = std::move(text);
  if (embedding) doc.embedding = Normalized(*embedding);
  return doc;
}

void Corpus::CheckDim(std::size_t dim, std::string_view id) {
  if (embedding_dim_ && *embedding_dim_ != dim) {
    throw ValidationError("embedding dimension mismatch for \"" +
                          std::string(id) + "\": expected " +
                          std::to_string(*embedding_dim_) + ", got " +
                          std::to_string(dim));
  }
  embedding_dim_ = dim;
}

void Corpus::Add(Document doc) {
  if (doc.id.empty()) throw ValidationError("document id must be non-empty");
  if (by_id_.contains(doc.id)) {
    throw ValidationError("duplicate document id \"" + doc.id + "\"");
  }
  if (doc.embedding) CheckDim(doc.embedding->size(), doc.id);
  by_id_.emplace(doc.id, documents_.size());
  documents_.push_back(std::move(doc));
}

void Corpus::SetEmbedding(std::string_view id, Embedding unit_embedding) {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) {
    throw ValidationError("unknown document id \"" + std::string(id) + "\"");
  }
  CheckDim(unit_embedding.size(), id);
  documents_[it->second].embedding = std::move(unit_embedding);
}

const Document* Corpus::Find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

const Document& Corpus::At(std::string_view id) const {
  const Document* doc = Find(id);
  if (!doc) {
    throw ValidationError("unknown document id \"" + std::string(id) + "\"");
  }
  return *doc;
}

Corpus IngestJsonl(const std::filesystem::path& path, const Tokenizer& tokenizer) {
  auto in = OpenForRead(path);
  Corpus corpus;
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
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("text") || !obj["text"].is_string()) {
      throw IoError(where + ": malformed record (line " + std::to_string(line_no) +
                    "), expected string fields \"id\" and \"text\"");
    }
    std::optional<Embedding> embedding;
    if (obj.contains("embedding") && !obj["embedding"].is_null()) {
      embedding = ParseVector(obj["embedding"], where);
      try {
        embedding = Normalized(*embedding);
      } catch (const Error&) {
        throw ValidationError(where + ": zero-norm embedding for \"" +
                              obj["id"].get<std::string>() + "\"");
      }
    }
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    doc.token_count = tokenizer.Tokenize(doc.text).size();
    doc.embedding = std::move(embedding);
    try {
      corpus.Add(std::move(doc));
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return corpus;
}

Corpus LoadEmbeddings(const std::filesystem::path& path, const Corpus& corpus) {
  auto in = OpenForRead(path);
  Corpus out = corpus;
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
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("embedding")) {
      throw IoError(where + ": expected fields \"id\" and \"embedding\"");
    }
    const auto id = obj["id"].get<std::string>();
    Embedding unit;
    try {
      unit = Normalized(ParseVector(obj["embedding"], where));
    } catch (const Error&) {
      throw ValidationError(where + ": invalid or zero-norm embedding for \"" + id + "\"");
    }
    try {
      out.SetEmbedding(id, std::move(unit));
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace flashrank
