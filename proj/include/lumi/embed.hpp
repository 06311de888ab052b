#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lumi/corpus.hpp"

namespace lumi {

struct SemanticVector {
  std::vector<double> values;
  double norm = 0.0;  // cached Euclidean norm

  static SemanticVector from_values(std::vector<double> values);
  std::size_t dim() const { return values.size(); }
};

// Plutchik's eight categories, in this fixed order.
inline constexpr std::array<const char*, 8> kEmotionNames = {
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust"};

struct AffectVector {
  std::array<double, 8> values{};  // L1-normalized when any entry > 0

  static AffectVector from_counts(const std::array<double, 8>& counts);
  bool is_zero() const;
};

// word<TAB>emotion lines; a word may carry several emotions.
class EmotionLexicon {
 public:
  static EmotionLexicon load(const std::filesystem::path& path);
  static const EmotionLexicon& bundled();

  AffectVector affect_vector(std::string_view text) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<int>> entries_;  // word -> emotion indices
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual SemanticVector embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

// Default backend: hashed bag-of-tokens with optional corpus IDF weights.
// Entries are non-negative, so cosine stays in [0, 1]. Token accumulation is
// in sorted order, making the output independent of word order (bag model)
// and bitwise reproducible.
class HashedEmbedder : public Embedder {
 public:
  explicit HashedEmbedder(std::size_t dim = 256);

  // Document frequencies over dialogue joined_text(); call once per corpus.
  void fit_idf(const Corpus& corpus);

  SemanticVector embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }
  std::size_t index_of(std::string_view token) const;

 private:
  std::size_t dim_;
  std::map<std::string, double> idf_;
  double unseen_idf_ = 1.0;
};

// OpenAI-style /v1/embeddings backend conforming to the same interface.
// Configured by URL + model; API key from LUMI_API_KEY.
std::unique_ptr<Embedder> make_remote_embedder(const std::string& url, const std::string& model,
                                               std::size_t dim);

double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const SemanticVector& a, const SemanticVector& b);

double l1_distance(std::span<const double> a, std::span<const double> b);
double l1_distance(const AffectVector& a, const AffectVector& b);

}  // namespace lumi
