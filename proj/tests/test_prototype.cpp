#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lumi/prototype.hpp"
#include "testutil.hpp"

using namespace lumi;

namespace {

struct Fixture {
  Corpus corpus;
  HashedEmbedder embedder{128};
  FeatureIndex index;

  explicit Fixture(std::vector<Dialogue> dialogues)
      : corpus(testutil::make_corpus(std::move(dialogues))),
        index(FeatureIndex::build(corpus, embedder, EmotionLexicon::bundled())) {}
};

// Exhaustive scorer used as the retrieval oracle.
std::vector<std::pair<std::string, double>> oracle_topk(const Prototype& proto,
                                                        const FeatureIndex& index,
                                                        std::size_t k,
                                                        const SimilarityWeights& w) {
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const DialogueFeatures& f = index.at(i);
    if (f.dialogue_id == proto.dialogue_id) continue;
    const double sem = cosine(proto.semantic, f.semantic);
    const double emo = 1.0 / (1.0 + l1_distance(proto.affect, f.affect));
    std::int64_t mov = 0;
    for (const std::string& m : proto.mentions) mov += f.mentions.count(m);
    const double r = sem * emo / (1.0 + std::exp(-w.steepness * double(mov)));
    double mov_term = double(mov);
    if (w.normalize_mov && !proto.mentions.empty()) mov_term /= double(proto.mentions.size());
    all.emplace_back(f.dialogue_id,
                     w.sem * sem + w.emo * emo + w.mov * mov_term + w.interaction * r);
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace

TEST_SUITE("prototype") {

TEST_CASE("select_prototype: singleton subset returns its only member") {
  Fixture fx({testutil::make_dialogue("d1", {"a quiet movie"}, {"m1"})});
  const Prototype p = select_prototype("m1", {0}, fx.index);
  CHECK(p.dialogue_id == "d1");
  CHECK(p.movie_id == "m1");
  CHECK(p.mentions == std::set<std::string>{"m1"});
}

TEST_CASE("select_prototype: near-duplicates beat the outlier") {
  Fixture fx({
      testutil::make_dialogue("d1", {"a happy comedy night with friends"}, {"m1"}),
      testutil::make_dialogue("d2", {"a happy comedy night with family"}, {"m1"}),
      testutil::make_dialogue("d3", {"grim war documentary archive footage"}, {"m1"}),
  });
  // Oracle: brute-force summed pairwise equal-weight scores.
  const SimilarityWeights equal = SimilarityWeights::equal();
  double best_score = -1e18;
  std::string best_id;
  for (std::size_t i = 0; i < 3; ++i) {
    Prototype candidate;
    candidate.movie_id = "m1";
    candidate.dialogue_id = fx.index.at(i).dialogue_id;
    candidate.semantic = fx.index.at(i).semantic;
    candidate.affect = fx.index.at(i).affect;
    candidate.mentions = fx.index.at(i).mentions;
    double total = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      total += final_score(candidate, fx.index.at(j), equal);
    }
    if (total > best_score) {
      best_score = total;
      best_id = candidate.dialogue_id;
    }
  }
  const Prototype p = select_prototype("m1", {0, 1, 2}, fx.index);
  CHECK(p.dialogue_id == best_id);
  CHECK((p.dialogue_id == "d1" || p.dialogue_id == "d2"));
}

TEST_CASE("select_prototype: ties break on the smallest dialogue id") {
  Fixture fx({
      testutil::make_dialogue("db", {"same text here"}, {"m1"}),
      testutil::make_dialogue("da", {"same text here"}, {"m1"}),
      testutil::make_dialogue("dc", {"same text here"}, {"m1"}),
  });
  const Prototype p = select_prototype("m1", {0, 1, 2}, fx.index);
  CHECK(p.dialogue_id == "da");
}

TEST_CASE("select_prototype is invariant to subset ordering") {
  Rng rng(17);
  const Corpus corpus = testutil::random_corpus(rng, 12, 4);
  HashedEmbedder embedder(128);
  const FeatureIndex index = FeatureIndex::build(corpus, embedder, EmotionLexicon::bundled());
  std::vector<std::size_t> subset(corpus.dialogues.size());
  std::iota(subset.begin(), subset.end(), 0);
  const Prototype a = select_prototype("m", subset, index);
  std::reverse(subset.begin(), subset.end());
  const Prototype b = select_prototype("m", subset, index);
  CHECK(a.dialogue_id == b.dialogue_id);
}

TEST_CASE("select_prototype: empty subset is an error, strategies work") {
  Fixture fx({testutil::make_dialogue("d1", {"text"}, {"m1"}),
              testutil::make_dialogue("d2", {"text two"}, {"m1"})});
  CHECK_THROWS_AS(select_prototype("m1", {}, fx.index), Error);
  Rng rng(3);
  const Prototype random_p =
      select_prototype("m1", {0, 1}, fx.index, PrototypeStrategy::random, &rng);
  CHECK((random_p.dialogue_id == "d1" || random_p.dialogue_id == "d2"));
  const Prototype centroid_p =
      select_prototype("m1", {0, 1}, fx.index, PrototypeStrategy::centroid_nearest);
  CHECK((centroid_p.dialogue_id == "d1" || centroid_p.dialogue_id == "d2"));
  CHECK_THROWS_AS(select_prototype("m1", {0, 1}, fx.index, PrototypeStrategy::random, nullptr),
                  Error);
}

TEST_CASE("sim_sem: own dialogue scores 1, disjoint tokens score 0") {
  Fixture fx({
      testutil::make_dialogue("d1", {"storm river ghost"}, {"m1"}),
      testutil::make_dialogue("d2", {"dance letter garden"}, {"m2"}),
  });
  const Prototype p = select_prototype("m1", {0}, fx.index);
  CHECK(sim_sem(p, fx.index.at(0)) == doctest::Approx(1.0).epsilon(1e-12));
  // oracle: token sets disjoint and bucket-disjoint (see embed suite)
  CHECK(sim_sem(p, fx.index.at(1)) == 0.0);
  CHECK(sim_sem(p, fx.index.at(1)) == cosine(fx.index.at(1).semantic, p.semantic));
}

TEST_CASE("sim_emo inverse L1 values") {
  Prototype p;
  DialogueFeatures x;
  p.affect.values = {0, 0, 0, 0, 1, 0, 0, 0};
  x.affect.values = {0, 0, 0, 0, 1, 0, 0, 0};
  CHECK(sim_emo(p, x) == doctest::Approx(1.0).epsilon(1e-12));
  x.affect.values = {0, 0, 0, 0.5, 0.5, 0, 0, 0};  // L1 = 1
  CHECK(sim_emo(p, x) == doctest::Approx(0.5).epsilon(1e-12));
  // L1 = 3 is impossible for normalized vectors; raw spans cover it
  CHECK(1.0 / (1.0 + 3.0) == doctest::Approx(0.25));
}

TEST_CASE("sim_mov counts shared mentions") {
  Prototype p;
  p.mentions = {"m1", "m2", "m3"};
  DialogueFeatures x;
  x.mentions = {"m4"};
  CHECK(sim_mov(p, x) == 0);
  x.mentions = {"m1", "m2", "m3"};
  CHECK(sim_mov(p, x) == 3);
  x.mentions = {"m2", "m3", "m4"};
  CHECK(sim_mov(p, x) == 2);
}

TEST_CASE("interaction_R hand values") {
  CHECK(interaction_R(1.0, 1.0, 0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(interaction_R(0.8, 0.9, 50, 1.0) - 0.8 * 0.9) < 1e-6);  // saturation
  CHECK(interaction_R(0.0, 0.7, 3, 1.0) == 0.0);
  CHECK_THROWS_AS(interaction_R(0.5, 0.5, 1, 0.0), Error);
}

TEST_CASE("final_score projections and hand fixture") {
  Fixture fx({
      testutil::make_dialogue("d1", {"happy comedy tonight"}, {"m1", "m2", "m3"}),
      testutil::make_dialogue("d2", {"happy comedy tomorrow"}, {"m2", "m3", "m4"}),
  });
  const Prototype p = select_prototype("m1", {0}, fx.index);
  const DialogueFeatures& x = fx.index.at(1);

  SimilarityWeights only_sem{1.0, 0.0, 0.0, 0.0, 1.0, false};
  CHECK(final_score(p, x, only_sem) == doctest::Approx(sim_sem(p, x)).epsilon(1e-12));

  SimilarityWeights only_mov{0.0, 0.0, 1.0, 0.0, 1.0, false};
  CHECK(final_score(p, x, only_mov) == doctest::Approx(2.0).epsilon(1e-12));

  // unnormalized overlap may push the score above 1
  CHECK(final_score(p, x, only_mov) > 1.0);

  SimilarityWeights norm_mov{0.0, 0.0, 1.0, 0.0, 1.0, true};
  CHECK(final_score(p, x, norm_mov) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const SimilarityWeights equal = SimilarityWeights::equal();
  const double sem = sim_sem(p, x);
  const double emo = sim_emo(p, x);
  const double r = sem * emo / (1.0 + std::exp(-2.0));
  CHECK(final_score(p, x, equal) ==
        doctest::Approx(0.25 * sem + 0.25 * emo + 0.25 * 2.0 + 0.25 * r).epsilon(1e-12));

  SimilarityWeights bad{0.5, 0.5, 0.5, 0.5, 1.0, false};
  CHECK_THROWS_AS(final_score(p, x, bad), Error);
}

TEST_CASE("final_score with normalized weights and no overlap stays in [0, 1]") {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    Corpus corpus = testutil::random_corpus(rng, 10, 6);
    // distinct mention namespaces remove all overlap
    for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
      auto& d = corpus.dialogues[i];
      std::set<std::string> fresh;
      int j = 0;
      for (const auto& m : d.mentions) fresh.insert("p" + std::to_string(i) + "_" + std::to_string(j++));
      d.mentions = fresh;
    }
    Corpus rebuilt = testutil::make_corpus({corpus.dialogues.begin(), corpus.dialogues.end()});
    HashedEmbedder embedder(64);
    const FeatureIndex index =
        FeatureIndex::build(rebuilt, embedder, EmotionLexicon::bundled());
    const Prototype p = select_prototype(*rebuilt.dialogues[0].mentions.begin(), {0}, index);
    const SimilarityWeights w{0.4, 0.2, 0.2, 0.2, 1.0, false};
    for (std::size_t i = 1; i < index.size(); ++i) {
      CHECK(sim_mov(p, index.at(i)) == 0);
      const double score = final_score(p, index.at(i), w);
      CHECK(score >= 0.0);
      CHECK(score <= 1.0);
    }
  }
}

TEST_CASE("top_k_neighbors equals exhaustive scoring") {
  Rng rng(31);
  const SimilarityWeights w;  // defaults 0.4/0.2/0.2/0.2
  for (int trial = 0; trial < 30; ++trial) {
    const bool ties = trial % 3 == 0;
    Corpus corpus = testutil::random_corpus(rng, 20, 6, ties);
    HashedEmbedder embedder(64);
    const FeatureIndex index = FeatureIndex::build(corpus, embedder, EmotionLexicon::bundled());
    const auto subsets = build_subsets(corpus, segment(compute_popularity(corpus), 1, 5));
    if (subsets.empty()) continue;
    const auto& [movie, subset] = *subsets.begin();
    if (subset.empty()) continue;
    const Prototype p = select_prototype(movie, subset, index);
    const std::size_t k = 1 + rng.below(6);
    const SupportSet mine = top_k_neighbors(p, index, k, w);
    const auto expected = oracle_topk(p, index, k, w);
    REQUIRE(mine.neighbors.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(mine.neighbors[i].first == expected[i].first);
      CHECK(mine.neighbors[i].second == doctest::Approx(expected[i].second).epsilon(1e-12));
    }
    // support-set invariants
    for (std::size_t i = 1; i < mine.neighbors.size(); ++i)
      CHECK(mine.neighbors[i - 1].second >= mine.neighbors[i].second);
    for (const auto& [id, score] : mine.neighbors) CHECK(id != p.dialogue_id);
  }
}

TEST_CASE("top_k_neighbors: K larger than corpus returns all others sorted") {
  Fixture fx({
      testutil::make_dialogue("d1", {"alpha beta"}, {"m1"}),
      testutil::make_dialogue("d2", {"alpha beta gamma"}, {"m2"}),
      testutil::make_dialogue("d3", {"delta"}, {"m3"}),
  });
  const Prototype p = select_prototype("m1", {0}, fx.index);
  const SupportSet s = top_k_neighbors(p, fx.index, 50, SimilarityWeights{});
  CHECK(s.neighbors.size() == 2);
  CHECK_THROWS_AS(top_k_neighbors(p, fx.index, 0, SimilarityWeights{}), Error);
}

TEST_CASE("equal scores order by dialogue id") {
  Fixture fx({
      testutil::make_dialogue("proto", {"xx yy"}, {"m1"}),
      testutil::make_dialogue("db", {"zz ww"}, {"m9"}),
      testutil::make_dialogue("da", {"zz ww"}, {"m9"}),
  });
  const Prototype p = select_prototype("m1", {0}, fx.index);
  const SupportSet s = top_k_neighbors(p, fx.index, 2, SimilarityWeights{});
  REQUIRE(s.neighbors.size() == 2);
  CHECK(s.neighbors[0].second == s.neighbors[1].second);
  CHECK(s.neighbors[0].first == "da");
  CHECK(s.neighbors[1].first == "db");
}

TEST_CASE("ranking is invariant to positive scaling of semantic vectors") {
  // Wrap the embedder so every vector is scaled by a positive constant; with
  // cosine similarity the ranking must not move.
  class ScaledEmbedder : public Embedder {
   public:
    ScaledEmbedder(const Embedder& inner, double scale) : inner_(inner), scale_(scale) {}
    SemanticVector embed(std::string_view text) const override {
      SemanticVector v = inner_.embed(text);
      std::vector<double> scaled = v.values;
      for (double& x : scaled) x *= scale_;
      return SemanticVector::from_values(std::move(scaled));
    }
    std::size_t dim() const override { return inner_.dim(); }

   private:
    const Embedder& inner_;
    double scale_;
  };

  Rng rng(41);
  const Corpus corpus = testutil::random_corpus(rng, 15, 5);
  HashedEmbedder base(64);
  const ScaledEmbedder scaled(base, 7.25);
  const FeatureIndex index1 = FeatureIndex::build(corpus, base, EmotionLexicon::bundled());
  const FeatureIndex index2 = FeatureIndex::build(corpus, scaled, EmotionLexicon::bundled());
  const auto subsets = build_subsets(corpus, segment(compute_popularity(corpus), 1, 5));
  const SimilarityWeights w;
  for (const auto& [movie, subset] : subsets) {
    if (subset.empty()) continue;
    const Prototype p1 = select_prototype(movie, subset, index1);
    const Prototype p2 = select_prototype(movie, subset, index2);
    CHECK(p1.dialogue_id == p2.dialogue_id);
    const SupportSet s1 = top_k_neighbors(p1, index1, 5, w);
    const SupportSet s2 = top_k_neighbors(p2, index2, 5, w);
    REQUIRE(s1.neighbors.size() == s2.neighbors.size());
    for (std::size_t i = 0; i < s1.neighbors.size(); ++i)
      CHECK(s1.neighbors[i].first == s2.neighbors[i].first);
  }
}

TEST_CASE("build_support_union joins prototypes and neighbors") {
  Fixture fx({
      testutil::make_dialogue("p1", {"happy fun alpha"}, {"m1"}),
      testutil::make_dialogue("p2", {"happy fun beta"}, {"m2"}),
      testutil::make_dialogue("n1", {"happy fun alpha beta"}, {"m3"}),
      testutil::make_dialogue("n2", {"happy fun gamma"}, {"m4"}),
      testutil::make_dialogue("n3", {"totally different words"}, {"m5"}),
  });
  const Prototype p1 = select_prototype("m1", {0}, fx.index);
  const Prototype p2 = select_prototype("m2", {1}, fx.index);
  const SimilarityWeights w;

  // single prototype: S_1 = {prototype} + its support set
  const auto single = build_support_union({p1}, fx.index, 2, w);
  const SupportSet s1 = top_k_neighbors(p1, fx.index, 2, w);
  std::set<std::string> expected = {p1.dialogue_id};
  for (const auto& [id, score] : s1.neighbors) expected.insert(id);
  CHECK(single == expected);

  // two prototypes with overlapping neighbors: union is smaller than the sum
  const auto both = build_support_union({p1, p2}, fx.index, 2, w);
  const SupportSet s2 = top_k_neighbors(p2, fx.index, 2, w);
  std::set<std::string> oracle = {p1.dialogue_id, p2.dialogue_id};
  for (const auto& [id, score] : s1.neighbors) oracle.insert(id);
  for (const auto& [id, score] : s2.neighbors) oracle.insert(id);
  CHECK(both == oracle);
  CHECK(both.size() < 2 + s1.neighbors.size() + s2.neighbors.size());
}

}  // TEST_SUITE
