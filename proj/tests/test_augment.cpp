#include <filesystem>

#include "doctest.h"
#include "lumi/augment.hpp"
#include "testutil.hpp"

using namespace lumi;
namespace fs = std::filesystem;

namespace {

AugmentConfig test_config() {
  AugmentConfig cfg;
  cfg.retry_backoff_ms = 0;
  return cfg;
}

// Embedder with prescribed vectors per exact text, used to pin filter sims.
class StubEmbedder : public Embedder {
 public:
  void set(std::string text, std::vector<double> vector) {
    vectors_[std::move(text)] = std::move(vector);
  }
  SemanticVector embed(std::string_view text) const override {
    auto it = vectors_.find(std::string(text));
    if (it != vectors_.end()) return SemanticVector::from_values(it->second);
    return SemanticVector::from_values({0.0, 0.0});
  }
  std::size_t dim() const override { return 2; }

 private:
  std::map<std::string, std::vector<double>> vectors_;
};

// Fails whenever the prompt mentions a marker substring.
class FlakyClient : public ChatClient {
 public:
  explicit FlakyClient(std::string marker) : marker_(std::move(marker)) {}
  ChatResult complete(const std::string& prompt, double temperature,
                      std::uint64_t seed) override {
    if (prompt.find(marker_) != std::string::npos)
      return {false, "", "injected transport failure"};
    return mock_.complete(prompt, temperature, seed);
  }

 private:
  std::string marker_;
  MockChatClient mock_;
};

std::vector<std::unique_ptr<Judge>> scripted_judges(int passes, int total = 5,
                                                    bool all_error = false) {
  std::vector<std::unique_ptr<Judge>> judges;
  for (int j = 0; j < total; ++j) {
    judges.push_back(std::make_unique<ScriptedJudge>("judge" + std::to_string(j),
                                                     j < passes, all_error));
  }
  return judges;
}

Candidate make_candidate(std::string id, std::string movie, Tier tier, std::string text,
                         int pass_count = 5) {
  Candidate c;
  c.id = std::move(id);
  c.movie_id = std::move(movie);
  c.tier = tier;
  c.text = std::move(text);
  c.state = CandidateState::accepted;
  c.pass_count = pass_count;
  return c;
}

struct PipelineFixture {
  Corpus corpus;
  Segmentation seg;
  HashedEmbedder embedder{128};

  PipelineFixture() {
    corpus = testutil::make_corpus({
        testutil::make_dialogue("d1", {"a scary thriller night", "try @301 then"}, {"301"}),
        testutil::make_dialogue("d2", {"happy comedy for the family"}, {"302"}),
        testutil::make_dialogue("d3", {"more happy comedy ideas"}, {"302"}),
        testutil::make_dialogue("d4", {"space adventure with laughs"}, {"303"}),
        testutil::make_dialogue("d5", {"a quiet romantic drama"}, {"304"}),
        testutil::make_dialogue("d6", {"another quiet romantic pick"}, {"304"}),
        testutil::make_dialogue("d7", {"yet another romantic night"}, {"304"}),
        testutil::make_dialogue("d8", {"classic western standoff"}, {"305"}),
        testutil::make_dialogue("d9", {"musical with great songs"}, {"306"}),
        testutil::make_dialogue("d10", {"documentary about rivers"}, {"307"}),
    });
    seg = segment(compute_popularity(corpus), 1, 2);
    embedder.fit_idf(corpus);
  }
};

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("config invariants") {
  AugmentConfig cfg = test_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.review_min = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = test_config();
  cfg.filter_threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = test_config();
  cfg.rho = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("build_prompt is deterministic and names the title once") {
  PipelineFixture fx;
  const FeatureIndex index = FeatureIndex::build(fx.corpus, fx.embedder,
                                                 EmotionLexicon::bundled());
  const auto subsets = build_subsets(fx.corpus, fx.seg);
  const Prototype proto = select_prototype("302", subsets.at("302"), index);
  const SupportSet support = top_k_neighbors(proto, index, 5, SimilarityWeights{});

  const std::string title = "ZQX UNIQUE TITLE";
  const std::string prompt1 = build_prompt(proto, support, fx.corpus, title);
  const std::string prompt2 = build_prompt(proto, support, fx.corpus, title);
  CHECK(prompt1 == prompt2);

  std::size_t occurrences = 0;
  for (std::size_t pos = prompt1.find(title); pos != std::string::npos;
       pos = prompt1.find(title, pos + 1))
    ++occurrences;
  CHECK(occurrences == 1);
  CHECK(prompt1.find("Prototype dialogue:") != std::string::npos);
  CHECK(prompt1.find("Similar dialogue 1:") != std::string::npos);

  const SupportSet empty{proto.movie_id, {}};
  const std::string bare = build_prompt(proto, empty, fx.corpus, title);
  CHECK(bare.find("Similar dialogue") == std::string::npos);
  CHECK(bare.find("Prototype dialogue:") != std::string::npos);
}

TEST_CASE("generate draws tier-dependent counts and records temperature") {
  const AugmentConfig cfg = test_config();
  MockChatClient client;
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(1000 + trial);
    const auto tail = generate("prompt text", "m1", Tier::tail, cfg, client, rng);
    CHECK(tail.size() >= 8);
    CHECK(tail.size() <= 10);
    Rng rng2(2000 + trial);
    const auto body = generate("prompt text", "m1", Tier::body, cfg, client, rng2);
    CHECK(body.size() >= 4);
    CHECK(body.size() <= 5);
    for (const Candidate& c : tail) {
      CHECK(c.temperature == cfg.temperature);
      CHECK(c.state == CandidateState::generated);
      CHECK(c.movie_id == "m1");
    }
  }
}

TEST_CASE("mock generation is a pure function of prompt and seed") {
  const AugmentConfig cfg = test_config();
  MockChatClient c1, c2;
  Rng r1(7), r2(7);
  const auto a = generate("identical prompt", "m", Tier::body, cfg, c1, r1);
  const auto b = generate("identical prompt", "m", Tier::body, cfg, c2, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("transient failures are retried; permanent ones surface per movie") {
  AugmentConfig cfg = test_config();
  cfg.retry_attempts = 3;
  MockChatClient flaky(2);  // first two attempts per request fail
  Rng rng(1);
  CHECK_NOTHROW(generate("p", "m", Tier::body, cfg, flaky, rng));

  MockChatClient dead(99);
  Rng rng2(1);
  CHECK_THROWS_AS(generate("p", "m", Tier::body, cfg, dead, rng2), Error);
}

TEST_CASE("pipeline records per-movie errors and continues") {
  PipelineFixture fx;
  // "302" appears in the failing movie's prompt via its own transcripts.
  FlakyClient client("Fixture title 302");
  Corpus corpus = fx.corpus;
  corpus.catalog["302"] = "Fixture title 302";
  auto judges = scripted_judges(5);
  AugmentConfig cfg = test_config();
  const AugmentationOutcome outcome =
      run_augmentation(corpus, fx.seg, cfg, SimilarityWeights{}, 3, client, judges,
                       fx.embedder, EmotionLexicon::bundled(), 11);
  REQUIRE(outcome.movie_errors.size() == 1);
  CHECK(outcome.movie_errors[0].first == "302");
  CHECK(!outcome.candidates.empty());  // other movies went through
  for (const Candidate& c : outcome.candidates) CHECK(c.movie_id != "302");
}

TEST_CASE("similarity filter discards strictly above the threshold") {
  StubEmbedder stub;
  stub.set("near copy", {0.86, std::sqrt(1.0 - 0.86 * 0.86)});
  stub.set("boundary", {17.0, 0.0});
  stub.set("fresh", {0.20, std::sqrt(1.0 - 0.04)});

  Prototype proto;
  proto.movie_id = "m";
  proto.dialogue_id = "p";
  proto.semantic = SemanticVector::from_values({1.0, 0.0});

  std::vector<Candidate> candidates;
  for (const char* text : {"near copy", "boundary", "fresh"}) {
    Candidate c;
    c.id = text;
    c.text = text;
    c.state = CandidateState::generated;
    candidates.push_back(c);
  }

  // 0.86 > 0.85 -> filtered
  similarity_filter(candidates, proto, 0.85, stub);
  CHECK(candidates[0].sim_to_prototype == doctest::Approx(0.86).epsilon(1e-12));
  CHECK(candidates[0].state == CandidateState::filtered_out);
  // equality is kept: threshold set to the exact computed similarity (1.0)
  CHECK(candidates[2].state == CandidateState::generated);
  CHECK(candidates[2].sim_to_prototype == doctest::Approx(0.20).epsilon(1e-12));

  std::vector<Candidate> boundary_case;
  Candidate b;
  b.id = "boundary";
  b.text = "boundary";
  b.state = CandidateState::generated;
  boundary_case.push_back(b);
  const double sim = cosine(stub.embed("boundary"), proto.semantic);
  similarity_filter(boundary_case, proto, sim, stub);  // sim == threshold -> kept
  CHECK(boundary_case[0].state == CandidateState::generated);
}

TEST_CASE("judge routing follows the vote bands") {
  const AugmentConfig cfg = test_config();
  const CandidateState expected[] = {
      CandidateState::discarded, CandidateState::discarded, CandidateState::in_review,
      CandidateState::in_review, CandidateState::accepted,  CandidateState::accepted,
  };
  for (int passes = 0; passes <= 5; ++passes) {
    ReviewQueue queue;
    Candidate c;
    c.id = "cand" + std::to_string(passes);
    c.text = "some transcript";
    c.state = CandidateState::generated;
    auto judges = scripted_judges(passes);
    judge_and_route(c, judges, cfg, queue);
    CHECK(c.pass_count == passes);
    CHECK(c.state == expected[passes]);
    CHECK(queue.entries().size() == (c.state == CandidateState::in_review ? 1 : 0));
    if (!queue.entries().empty()) {
      CHECK(queue.entries()[0].candidate_id == c.id);
      CHECK(queue.entries()[0].pass_count == passes);
      CHECK(queue.entries()[0].resolution == ReviewResolution::pending);
    }
  }
}

TEST_CASE("judge failures fail closed") {
  const AugmentConfig cfg = test_config();
  ReviewQueue queue;
  Candidate c;
  c.id = "cand";
  c.text = "text";
  c.state = CandidateState::generated;
  auto judges = scripted_judges(5, 5, /*all_error=*/true);
  judge_and_route(c, judges, cfg, queue);
  CHECK(c.pass_count == 0);
  CHECK(c.state == CandidateState::discarded);
  for (const JudgeVerdict& v : c.votes) {
    CHECK_FALSE(v.pass);
    CHECK(!v.error.empty());
  }
}

TEST_CASE("routing totality over every possible pass count") {
  AugmentConfig cfg = test_config();
  for (int passes = 0; passes <= cfg.judge_count; ++passes) {
    ReviewQueue queue;
    Candidate c;
    c.id = "x";
    c.text = "t";
    c.state = CandidateState::generated;
    auto judges = scripted_judges(passes);
    judge_and_route(c, judges, cfg, queue);
    const bool terminal = c.state == CandidateState::accepted ||
                          c.state == CandidateState::discarded ||
                          c.state == CandidateState::in_review;
    CHECK(terminal);
    CHECK((c.state == CandidateState::in_review) == (queue.entries().size() == 1));
  }
}

TEST_CASE("state machine soundness over random vote vectors") {
  Rng rng(314);
  AugmentConfig cfg = test_config();
  for (int trial = 0; trial < 200; ++trial) {
    Candidate c;
    c.id = "c" + std::to_string(trial);
    c.text = "text " + std::to_string(trial);
    c.state = CandidateState::generated;
    c.sim_to_prototype = rng.real();
    if (c.sim_to_prototype > cfg.filter_threshold) {
      c.state = CandidateState::filtered_out;
    }
    const int passes = static_cast<int>(rng.below(6));
    ReviewQueue queue;
    auto judges = scripted_judges(passes);
    judge_and_route(c, judges, cfg, queue);
    if (c.sim_to_prototype > cfg.filter_threshold) {
      CHECK(c.state == CandidateState::filtered_out);  // voting never resurrects
    } else if (c.state == CandidateState::accepted) {
      CHECK(c.pass_count >= cfg.accept_min);
      CHECK(c.sim_to_prototype <= cfg.filter_threshold);
    } else if (c.state == CandidateState::in_review) {
      CHECK(c.pass_count >= cfg.review_min);
      CHECK(c.pass_count < cfg.accept_min);
    } else {
      CHECK(c.state == CandidateState::discarded);
      CHECK(c.pass_count < cfg.review_min);
    }
  }
}

TEST_CASE("review queue resolution rules") {
  const fs::path path = fs::temp_directory_path() / "lumi_queue_test.jsonl";
  ReviewQueue queue;
  queue.add({"cand1", 3, "2024-01-01T00:00:00Z", ReviewResolution::pending});
  queue.add({"cand2", 2, "2024-01-01T00:00:00Z", ReviewResolution::pending});
  queue.save(path);

  ReviewQueue loaded = ReviewQueue::load(path);
  REQUIRE(loaded.entries().size() == 2);
  loaded.resolve("cand1", ReviewResolution::approved);
  CHECK(loaded.entries()[0].resolution == ReviewResolution::approved);
  loaded.resolve("cand2", ReviewResolution::rejected);
  CHECK_THROWS_AS(loaded.resolve("cand1", ReviewResolution::approved), Error);  // double
  CHECK_THROWS_AS(loaded.resolve("ghost", ReviewResolution::approved), Error);  // unknown
  loaded.save(path);
  const ReviewQueue reloaded = ReviewQueue::load(path);
  CHECK(reloaded.entries()[0].resolution == ReviewResolution::approved);
  CHECK(reloaded.entries()[1].resolution == ReviewResolution::rejected);
  fs::remove(path);
}

TEST_CASE("integrate: rho = 0 leaves the corpus unchanged") {
  PipelineFixture fx;
  const auto report = integrate(
      {make_candidate("301#0000", "301", Tier::tail, "A: hello\nB: world")}, fx.corpus, 0.0);
  CHECK(report.added == 0);
  CHECK(report.corpus.dialogues.size() == fx.corpus.dialogues.size());
  CHECK(report.dropped_by_cap.size() == 1);
}

TEST_CASE("integrate: cap keeps the strongest-voted candidates") {
  // 100 originals, 40 accepted, rho = 0.3 -> 130 total, 10 dropped by lowest
  // pass count then id.
  std::vector<Dialogue> originals;
  for (int i = 0; i < 100; ++i)
    originals.push_back(testutil::make_dialogue("orig" + std::to_string(i), {"text"}, {"400"}));
  Corpus corpus = testutil::make_corpus(std::move(originals));

  std::vector<Candidate> accepted;
  for (int i = 0; i < 40; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "m#%04d", i);
    accepted.push_back(make_candidate(id, "400", Tier::tail, "A: hi\nB: there",
                                      i < 28 ? 5 : 4));
  }
  const auto report = integrate(accepted, corpus, 0.3);
  CHECK(report.added == 30);
  CHECK(report.corpus.dialogues.size() == 130);
  REQUIRE(report.dropped_by_cap.size() == 10);
  // kept: 28 fives + the two smallest-id fours (0028, 0029)
  for (int i = 0; i < 10; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "m#%04d", 30 + i);
    CHECK(report.dropped_by_cap[i] == id);
  }
}

TEST_CASE("integrate tags origins and parses mentions") {
  PipelineFixture fx;
  const auto n_before = fx.corpus.dialogues.size();
  std::vector<Candidate> accepted = {
      make_candidate("301#0000", "301", Tier::tail, "A: you will like @302\nB: adding it"),
      make_candidate("302#0000", "302", Tier::body, "A: two turns\nB: indeed"),
  };
  const auto report = integrate(accepted, fx.corpus, 0.5);
  REQUIRE(report.added == 2);
  const Dialogue& tail_d = report.corpus.dialogues[n_before];
  CHECK(tail_d.origin == Origin::augmented_tail);
  CHECK(tail_d.mentions == std::set<std::string>{"301", "302"});
  CHECK(tail_d.id == "aug-301#0000");
  const Dialogue& body_d = report.corpus.dialogues[n_before + 1];
  CHECK(body_d.origin == Origin::augmented_body);
  // catalog untouched
  CHECK(report.corpus.catalog == fx.corpus.catalog);
}

TEST_CASE("integrate skips unparseable transcripts with a report") {
  PipelineFixture fx;
  std::vector<Candidate> accepted = {
      make_candidate("301#0000", "301", Tier::tail, "no speaker markers at all"),
      make_candidate("301#0001", "301", Tier::tail, "A: fine\nB: also fine"),
  };
  const auto report = integrate(accepted, fx.corpus, 0.5);
  CHECK(report.added == 1);
  REQUIRE(report.skipped_unparseable.size() == 1);
  CHECK(report.skipped_unparseable[0] == "301#0000");
}

TEST_CASE("full mock pipeline is byte-deterministic per seed") {
  PipelineFixture fx;
  AugmentConfig cfg = test_config();
  cfg.rho = 0.5;
  const auto run = [&](std::uint64_t seed) {
    MockChatClient client;
    std::vector<std::unique_ptr<Judge>> judges;
    for (int j = 0; j < cfg.judge_count; ++j)
      judges.push_back(std::make_unique<MockJudge>("judge" + std::to_string(j + 1)));
    const AugmentationOutcome outcome =
        run_augmentation(fx.corpus, fx.seg, cfg, SimilarityWeights{}, 3, client, judges,
                         fx.embedder, EmotionLexicon::bundled(), seed);
    return to_jsonl(outcome.integration.corpus);
  };
  const std::string a = run(42);
  const std::string b = run(42);
  CHECK(a == b);
  CHECK(a.size() > 0);

  // every augmented dialogue carries its tier origin
  MockChatClient client;
  std::vector<std::unique_ptr<Judge>> judges;
  for (int j = 0; j < cfg.judge_count; ++j)
    judges.push_back(std::make_unique<MockJudge>("judge" + std::to_string(j + 1)));
  const AugmentationOutcome outcome =
      run_augmentation(fx.corpus, fx.seg, cfg, SimilarityWeights{}, 3, client, judges,
                       fx.embedder, EmotionLexicon::bundled(), 42);
  for (std::size_t i = fx.corpus.dialogues.size();
       i < outcome.integration.corpus.dialogues.size(); ++i) {
    const Origin origin = outcome.integration.corpus.dialogues[i].origin;
    CHECK((origin == Origin::augmented_tail || origin == Origin::augmented_body));
  }
  // no candidate reaches accepted without surviving the filter
  for (const Candidate& c : outcome.candidates) {
    if (c.state == CandidateState::accepted) {
      CHECK(c.sim_to_prototype <= cfg.filter_threshold);
      CHECK(c.pass_count >= cfg.accept_min);
    }
  }
}

TEST_CASE("candidates serialize round-trip") {
  Candidate c = make_candidate("m#0001", "m", Tier::body, "A: x\nB: y", 3);
  c.votes.push_back({"judge1", true, 0.9, 0.8, 0.7, ""});
  c.votes.push_back({"judge2", false, 0.1, 0.2, 0.3, "timeout"});
  c.sim_to_prototype = 0.5;
  const std::string text = candidates_to_json_string({c});
  const auto back = candidates_from_json_string(text);
  REQUIRE(back.size() == 1);
  CHECK(back[0].id == c.id);
  CHECK(back[0].tier == c.tier);
  CHECK(back[0].state == c.state);
  CHECK(back[0].pass_count == 3);
  REQUIRE(back[0].votes.size() == 2);
  CHECK(back[0].votes[1].error == "timeout");
}

}  // TEST_SUITE
