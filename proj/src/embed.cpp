#include "lumi/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lumi/util.hpp"

namespace lumi {

SemanticVector SemanticVector::from_values(std::vector<double> values) {
  SemanticVector v;
  v.values = std::move(values);
  double sq = 0.0;
  for (double x : v.values) {
    if (!std::isfinite(x)) fail(ErrorKind::invariant, "SemanticVector entry not finite");
    sq += x * x;
  }
  v.norm = std::sqrt(sq);
  return v;
}

AffectVector AffectVector::from_counts(const std::array<double, 8>& counts) {
  AffectVector v;
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) fail(ErrorKind::invariant, "AffectVector entries must be non-negative");
    total += c;
  }
  if (total > 0.0) {
    for (std::size_t i = 0; i < counts.size(); ++i) v.values[i] = counts[i] / total;
  }
  return v;
}

bool AffectVector::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

EmotionLexicon EmotionLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "emotion lexicon not found: " + path.string());
  EmotionLexicon lex;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const auto tab = trimmed.find('\t');
    if (tab == std::string::npos)
      fail(ErrorKind::parse, "lexicon line " + std::to_string(line_number) + ": expected word<TAB>emotion");
    const std::string word = to_lower(trim(trimmed.substr(0, tab)));
    const std::string emotion = to_lower(trim(trimmed.substr(tab + 1)));
    const auto it = std::find_if(kEmotionNames.begin(), kEmotionNames.end(),
                                 [&emotion](const char* name) { return emotion == name; });
    if (it == kEmotionNames.end())
      fail(ErrorKind::parse,
           "lexicon line " + std::to_string(line_number) + ": unknown emotion " + emotion);
    const int idx = static_cast<int>(it - kEmotionNames.begin());
    auto& emotions = lex.entries_[word];
    if (std::find(emotions.begin(), emotions.end(), idx) == emotions.end())
      emotions.push_back(idx);
  }
  if (lex.entries_.empty())
    fail(ErrorKind::config, "emotion lexicon is empty: " + path.string());
  return lex;
}

const EmotionLexicon& EmotionLexicon::bundled() {
  static const EmotionLexicon lex = EmotionLexicon::load(LUMI_BUNDLED_LEXICON);
  return lex;
}

AffectVector EmotionLexicon::affect_vector(std::string_view text) const {
  std::array<double, 8> counts{};
  for (const std::string& token : tokenize(text)) {
    auto it = entries_.find(token);
    if (it == entries_.end()) continue;
    for (int emotion : it->second) counts[static_cast<std::size_t>(emotion)] += 1.0;
  }
  return AffectVector::from_counts(counts);
}

HashedEmbedder::HashedEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) fail(ErrorKind::config, "embedding dimension must be positive");
}

std::size_t HashedEmbedder::index_of(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dim_);
}

void HashedEmbedder::fit_idf(const Corpus& corpus) {
  std::map<std::string, std::int64_t> doc_freq;
  for (const Dialogue& d : corpus.dialogues) {
    std::map<std::string, int> seen;
    for (const std::string& token : tokenize(d.joined_text())) seen[token] = 1;
    for (const auto& [token, one] : seen) doc_freq[token] += 1;
  }
  const double n = static_cast<double>(corpus.dialogues.size());
  idf_.clear();
  for (const auto& [token, df] : doc_freq) {
    idf_[token] = std::log((1.0 + n) / (1.0 + static_cast<double>(df))) + 1.0;
  }
  unseen_idf_ = std::log(1.0 + n) + 1.0;
}

SemanticVector HashedEmbedder::embed(std::string_view text) const {
  std::map<std::string, double> tf;
  for (const std::string& token : tokenize(text)) tf[token] += 1.0;
  std::vector<double> values(dim_, 0.0);
  for (const auto& [token, count] : tf) {
    double idf = unseen_idf_;
    if (idf_.empty()) {
      idf = 1.0;
    } else if (auto it = idf_.find(token); it != idf_.end()) {
      idf = it->second;
    }
    values[index_of(token)] += count * idf;
  }
  return SemanticVector::from_values(std::move(values));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorKind::invariant, "cosine: dimension mismatch (" + std::to_string(a.size()) +
                                   " vs " + std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;  // neutral similarity for empty text
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine(const SemanticVector& a, const SemanticVector& b) {
  if (a.values.size() != b.values.size())
    fail(ErrorKind::invariant, "cosine: dimension mismatch (" + std::to_string(a.values.size()) +
                                   " vs " + std::to_string(b.values.size()) + ")");
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot / (a.norm * b.norm), -1.0, 1.0);
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorKind::invariant, "l1_distance: dimension mismatch (" + std::to_string(a.size()) +
                                   " vs " + std::to_string(b.size()) + ")");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum;
}

double l1_distance(const AffectVector& a, const AffectVector& b) {
  return l1_distance(std::span<const double>(a.values), std::span<const double>(b.values));
}

}  // namespace lumi
