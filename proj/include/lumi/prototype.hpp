#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lumi/corpus.hpp"
#include "lumi/embed.hpp"
#include "lumi/util.hpp"

namespace lumi {

struct SimilarityWeights {
  double sem = 0.4;
  double emo = 0.2;
  double mov = 0.2;
  double interaction = 0.2;
  double steepness = 1.0;      // alpha inside the interaction factor
  bool normalize_mov = false;  // divide the overlap by |M(prototype)|

  static SimilarityWeights equal() { return {0.25, 0.25, 0.25, 0.25, 1.0, false}; }
  void validate() const;
};

// Per-dialogue features reused by prototype selection, retrieval and the
// augmentation filter: one embedding + affect pass over the corpus.
struct DialogueFeatures {
  std::string dialogue_id;
  SemanticVector semantic;
  AffectVector affect;
  std::set<std::string> mentions;
};

class FeatureIndex {
 public:
  static FeatureIndex build(const Corpus& corpus, const Embedder& embedder,
                            const EmotionLexicon& lexicon);

  const DialogueFeatures& at(std::size_t corpus_index) const;
  const DialogueFeatures& by_id(const std::string& dialogue_id) const;
  std::size_t size() const { return features_.size(); }

 private:
  std::vector<DialogueFeatures> features_;
  std::map<std::string, std::size_t> by_id_;
};

struct Prototype {
  std::string movie_id;
  std::string dialogue_id;
  SemanticVector semantic;
  AffectVector affect;
  std::set<std::string> mentions;
};

enum class PrototypeStrategy { medoid, random, centroid_nearest };
const char* prototype_strategy_name(PrototypeStrategy s);
PrototypeStrategy prototype_strategy_from_name(const std::string& name);

struct SupportSet {
  std::string movie_id;
  std::vector<std::pair<std::string, double>> neighbors;  // (dialogue_id, FinalScore), ranked
};

double sim_sem(const Prototype& proto, const DialogueFeatures& x);
double sim_emo(const Prototype& proto, const DialogueFeatures& x);
std::int64_t sim_mov(const Prototype& proto, const DialogueFeatures& x);

// Sim_sem * Sim_emo * logistic(steepness * Sim_mov)
double interaction_R(double sem, double emo, std::int64_t mov, double steepness);

double final_score(const Prototype& proto, const DialogueFeatures& x,
                   const SimilarityWeights& w);

// Medoid of the movie's subset under equal-weight composite similarity;
// singleton subsets return their only member, ties break on the smallest
// dialogue_id. `random` and `centroid_nearest` are ablation switches.
Prototype select_prototype(const std::string& movie_id,
                           const std::vector<std::size_t>& subset, const FeatureIndex& index,
                           PrototypeStrategy strategy = PrototypeStrategy::medoid,
                           Rng* rng = nullptr);

// K highest-scoring dialogues over the whole corpus, prototype's own
// excluded, ties broken by ascending dialogue_id. Head-movie dialogues are
// eligible bridge samples.
SupportSet top_k_neighbors(const Prototype& proto, const FeatureIndex& index, std::size_t k,
                           const SimilarityWeights& w);

// S_1: prototype dialogues plus every support-set neighbor, de-duplicated.
std::set<std::string> build_support_union(const std::vector<Prototype>& prototypes,
                                          const FeatureIndex& index, std::size_t k,
                                          const SimilarityWeights& w);

}  // namespace lumi
