#include "lumi/prototype.hpp"

#include <algorithm>
#include <cmath>

namespace lumi {

void SimilarityWeights::validate() const {
  if (sem < 0.0 || emo < 0.0 || mov < 0.0 || interaction < 0.0)
    fail(ErrorKind::config, "SimilarityWeights: weights must be non-negative");
  const double sum = sem + emo + mov + interaction;
  if (std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::config, "SimilarityWeights: weights must sum to 1 (got " +
                                std::to_string(sum) + ")");
  if (!(steepness > 0.0)) fail(ErrorKind::config, "SimilarityWeights: steepness must be > 0");
}

const char* prototype_strategy_name(PrototypeStrategy s) {
  switch (s) {
    case PrototypeStrategy::medoid: return "medoid";
    case PrototypeStrategy::random: return "random";
    case PrototypeStrategy::centroid_nearest: return "centroid_nearest";
  }
  return "medoid";
}

PrototypeStrategy prototype_strategy_from_name(const std::string& name) {
  if (name == "medoid") return PrototypeStrategy::medoid;
  if (name == "random") return PrototypeStrategy::random;
  if (name == "centroid_nearest") return PrototypeStrategy::centroid_nearest;
  fail(ErrorKind::config, "unknown prototype strategy: " + name);
}

FeatureIndex FeatureIndex::build(const Corpus& corpus, const Embedder& embedder,
                                 const EmotionLexicon& lexicon) {
  FeatureIndex index;
  index.features_.reserve(corpus.dialogues.size());
  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
    const Dialogue& d = corpus.dialogues[i];
    DialogueFeatures f;
    f.dialogue_id = d.id;
    const std::string text = d.joined_text();
    f.semantic = embedder.embed(text);
    f.affect = lexicon.affect_vector(text);
    f.mentions = d.mentions;
    index.by_id_[d.id] = i;
    index.features_.push_back(std::move(f));
  }
  return index;
}

const DialogueFeatures& FeatureIndex::at(std::size_t corpus_index) const {
  if (corpus_index >= features_.size())
    fail(ErrorKind::invariant, "FeatureIndex: index out of range");
  return features_[corpus_index];
}

const DialogueFeatures& FeatureIndex::by_id(const std::string& dialogue_id) const {
  auto it = by_id_.find(dialogue_id);
  if (it == by_id_.end())
    fail(ErrorKind::not_found, "FeatureIndex: unknown dialogue id " + dialogue_id);
  return features_[it->second];
}

double sim_sem(const Prototype& proto, const DialogueFeatures& x) {
  return cosine(proto.semantic, x.semantic);
}

double sim_emo(const Prototype& proto, const DialogueFeatures& x) {
  return 1.0 / (1.0 + l1_distance(proto.affect, x.affect));
}

std::int64_t sim_mov(const Prototype& proto, const DialogueFeatures& x) {
  std::int64_t shared = 0;
  const auto& smaller = proto.mentions.size() <= x.mentions.size() ? proto.mentions : x.mentions;
  const auto& larger = proto.mentions.size() <= x.mentions.size() ? x.mentions : proto.mentions;
  for (const std::string& m : smaller) shared += larger.count(m);
  return shared;
}

double interaction_R(double sem, double emo, std::int64_t mov, double steepness) {
  if (!(steepness > 0.0)) fail(ErrorKind::config, "interaction_R: steepness must be > 0");
  const double logistic = 1.0 / (1.0 + std::exp(-steepness * static_cast<double>(mov)));
  return sem * emo * logistic;
}

double final_score(const Prototype& proto, const DialogueFeatures& x,
                   const SimilarityWeights& w) {
  w.validate();
  const double sem = sim_sem(proto, x);
  const double emo = sim_emo(proto, x);
  const std::int64_t mov = sim_mov(proto, x);
  double mov_term = static_cast<double>(mov);
  if (w.normalize_mov) {
    // Prototype dialogues always mention their own movie, so the set is
    // non-empty whenever normalization is meaningful.
    const double denom = static_cast<double>(proto.mentions.size());
    mov_term = denom > 0.0 ? mov_term / denom : 0.0;
  }
  const double r = interaction_R(sem, emo, mov, w.steepness);
  return w.sem * sem + w.emo * emo + w.mov * mov_term + w.interaction * r;
}

namespace {

Prototype prototype_from(const std::string& movie_id, const DialogueFeatures& f) {
  Prototype p;
  p.movie_id = movie_id;
  p.dialogue_id = f.dialogue_id;
  p.semantic = f.semantic;
  p.affect = f.affect;
  p.mentions = f.mentions;
  return p;
}

}  // namespace

Prototype select_prototype(const std::string& movie_id, const std::vector<std::size_t>& subset,
                           const FeatureIndex& index, PrototypeStrategy strategy, Rng* rng) {
  if (subset.empty())
    fail(ErrorKind::invariant, "select_prototype: empty subset for movie " + movie_id);
  if (subset.size() == 1) return prototype_from(movie_id, index.at(subset[0]));

  // Ordering-invariant: evaluate candidates by ascending dialogue_id.
  std::vector<std::size_t> ordered = subset;
  std::sort(ordered.begin(), ordered.end(), [&index](std::size_t a, std::size_t b) {
    return index.at(a).dialogue_id < index.at(b).dialogue_id;
  });

  if (strategy == PrototypeStrategy::random) {
    if (rng == nullptr)
      fail(ErrorKind::config, "select_prototype: random strategy needs an rng");
    return prototype_from(movie_id, index.at(ordered[rng->below(ordered.size())]));
  }

  const SimilarityWeights equal = SimilarityWeights::equal();
  std::size_t best = ordered[0];
  double best_score = -std::numeric_limits<double>::infinity();

  if (strategy == PrototypeStrategy::centroid_nearest) {
    const std::size_t dim = index.at(ordered[0]).semantic.dim();
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i : ordered) {
      const auto& v = index.at(i).semantic.values;
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += v[d];
    }
    const SemanticVector center = SemanticVector::from_values(std::move(centroid));
    for (std::size_t i : ordered) {
      const double score = cosine(center, index.at(i).semantic);
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    return prototype_from(movie_id, index.at(best));
  }

  for (std::size_t i : ordered) {
    const Prototype candidate = prototype_from(movie_id, index.at(i));
    std::vector<double> scores;
    scores.reserve(ordered.size() - 1);
    for (std::size_t j : ordered) {
      if (j == i) continue;
      scores.push_back(final_score(candidate, index.at(j), equal));
    }
    const double total = pairwise_sum(scores);
    if (total > best_score) {  // ties keep the earlier (smaller) dialogue_id
      best_score = total;
      best = i;
    }
  }
  return prototype_from(movie_id, index.at(best));
}

SupportSet top_k_neighbors(const Prototype& proto, const FeatureIndex& index, std::size_t k,
                           const SimilarityWeights& w) {
  if (k < 1) fail(ErrorKind::config, "top_k_neighbors: K must be >= 1");
  w.validate();
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const DialogueFeatures& f = index.at(i);
    if (f.dialogue_id == proto.dialogue_id) continue;
    scored.emplace_back(f.dialogue_id, final_score(proto, f, w));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > k) scored.resize(k);
  SupportSet s;
  s.movie_id = proto.movie_id;
  s.neighbors = std::move(scored);
  return s;
}

std::set<std::string> build_support_union(const std::vector<Prototype>& prototypes,
                                          const FeatureIndex& index, std::size_t k,
                                          const SimilarityWeights& w) {
  std::set<std::string> ids;
  for (const Prototype& proto : prototypes) {
    ids.insert(proto.dialogue_id);
    for (const auto& [dialogue_id, score] : top_k_neighbors(proto, index, k, w).neighbors)
      ids.insert(dialogue_id);
  }
  return ids;
}

}  // namespace lumi
