#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lumi/corpus.hpp"
#include "lumi/util.hpp"
#include "testutil.hpp"

using namespace lumi;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

const char* kTwoLineFixture =
    R"({"conversationId":"c1","messages":[{"senderWorkerId":"u1","text":"have you seen @101?"},{"senderWorkerId":"u2","text":"yes, loved it"}],"movieMentions":{"101":"Alpha","102":"Beta"}}
{"conversationId":"c2","messages":[{"senderWorkerId":"u1","text":"suggest something like @103"}],"movieMentions":{"103":"Gamma"}}
)";

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("ingest parses a two-line fixture") {
  const auto path = write_temp("lumi_corpus_two.jsonl", kTwoLineFixture);
  const Corpus corpus = ingest(path);
  CHECK(corpus.dialogues.size() == 2);
  CHECK(corpus.catalog.size() == 3);
  CHECK(corpus.dialogues[0].mentions == std::set<std::string>{"101", "102"});
  CHECK(corpus.dialogues[0].utterances[0].turn_index == 0);
  CHECK(corpus.dialogues[0].utterances[1].turn_index == 1);
  CHECK(corpus.warnings.empty());
  fs::remove(path);
}

TEST_CASE("ingest rejects an empty file") {
  const auto path = write_temp("lumi_corpus_empty.jsonl", "");
  CHECK_THROWS_WITH_AS(ingest(path), doctest::Contains("empty corpus"), Error);
  fs::remove(path);
}

TEST_CASE("unmapped inline movie reference produces a warning, not a drop") {
  const auto path = write_temp(
      "lumi_corpus_warn.jsonl",
      R"({"conversationId":"c1","messages":[{"senderWorkerId":"u1","text":"what about @111?"}],"movieMentions":{}}
)");
  const Corpus corpus = ingest(path);
  CHECK(corpus.dialogues.size() == 1);
  CHECK(corpus.dialogues[0].mentions.empty());
  REQUIRE(corpus.warnings.size() == 1);
  CHECK(corpus.warnings[0].message == "movie reference @111 in text but not in movieMentions");
  CHECK(corpus.warnings[0].line_number == 1);
  fs::remove(path);
}

TEST_CASE("malformed line and duplicate id errors carry line numbers") {
  const auto bad = write_temp("lumi_corpus_bad.jsonl", "{\"conversationId\": \n");
  CHECK_THROWS_WITH_AS(ingest(bad), doctest::Contains("line 1"), Error);
  fs::remove(bad);

  const auto dup = write_temp(
      "lumi_corpus_dup.jsonl",
      R"({"conversationId":"c1","messages":[{"text":"a"}],"movieMentions":{}}
{"conversationId":"c1","messages":[{"text":"b"}],"movieMentions":{}}
)");
  CHECK_THROWS_WITH_AS(ingest(dup), doctest::Contains("line 2"), Error);
  fs::remove(dup);
}

TEST_CASE("popularity counts dialogues, not occurrences") {
  // Movie 7 mentioned twice inside d1 (once in map) and once in d2 -> pop 2.
  Corpus corpus = testutil::make_corpus({
      testutil::make_dialogue("d1", {"@7 and again @7"}, {"7"}),
      testutil::make_dialogue("d2", {"@7 once"}, {"7"}),
      testutil::make_dialogue("d3", {"nothing"}, {"8"}),
  });
  corpus.catalog["9"] = "Never mentioned";
  const PopularityTable pop = compute_popularity(corpus);
  CHECK(pop.of("7") == 2);
  CHECK(pop.of("8") == 1);
  CHECK(pop.of("9") == 0);
}

TEST_CASE("segment thresholds follow the head/body/tail bands") {
  PopularityTable pop;
  pop.pop = {{"h", 7}, {"b", 3}, {"t", 1}, {"zero", 0}};
  const Segmentation seg = segment(pop, 1, 5);
  CHECK(seg.head == std::set<std::string>{"h"});
  CHECK(seg.body == std::set<std::string>{"b"});
  CHECK(seg.tail == std::set<std::string>{"t"});
  // pop = 0 movies stay in the catalog but out of the partition
  CHECK(seg.head.count("zero") + seg.body.count("zero") + seg.tail.count("zero") == 0);
  CHECK_THROWS_AS(segment(pop, 5, 5), Error);
  CHECK_THROWS_AS(segment(pop, 0, 5), Error);
}

TEST_CASE("quartile mode derives the tail threshold from the pop distribution") {
  PopularityTable pop;
  for (int i = 0; i < 12; ++i) pop.pop["t" + std::to_string(i)] = 1 + (i < 3 ? 0 : 1);
  pop.pop["big"] = 50;
  const Segmentation seg = segment_by_quartile(pop, 5);
  CHECK(seg.tail_max >= 1);
  CHECK(seg.tail_max < 5);
  CHECK(seg.head == std::set<std::string>{"big"});
}

TEST_CASE("build_subsets places a dialogue in every mentioned body/tail subset") {
  Corpus corpus = testutil::make_corpus({
      testutil::make_dialogue("d1", {"a"}, {"m1", "m2"}),
      testutil::make_dialogue("d2", {"b"}, {"m1"}),
      testutil::make_dialogue("d3", {"c"}, {"m3"}),
      testutil::make_dialogue("d4", {"d"}, {"m4"}),
      testutil::make_dialogue("d5", {"e"}, {"m5"}),
  });
  const PopularityTable pop = compute_popularity(corpus);
  const Segmentation seg = segment(pop, 1, 5);
  const auto subsets = build_subsets(corpus, seg);
  // d1 mentions two body/tail movies -> appears in both subsets
  CHECK(subsets.at("m1").size() == 2);
  CHECK(subsets.at("m2") == std::vector<std::size_t>{0});
  // tail movie with pop 1
  CHECK(subsets.at("m3").size() == 1);

  // |D_tail| as a union of dialogues: 3 tail movies each pop 1 (m3,m4,m5 plus
  // m2), body movie m1 pop 2.
  std::set<std::size_t> tail_union;
  for (const std::string& m : seg.tail) {
    for (std::size_t idx : subsets.at(m)) tail_union.insert(idx);
  }
  std::set<std::size_t> body_union;
  for (const std::string& m : seg.body) {
    for (std::size_t idx : subsets.at(m)) body_union.insert(idx);
  }
  CHECK(seg.body == std::set<std::string>{"m1"});
  CHECK(body_union.size() == 2);
  CHECK(tail_union.size() == 4);  // d1 (via m2), d3, d4, d5
}

TEST_CASE("build_subsets round-trip: sizes add up") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const Corpus corpus = testutil::random_corpus(rng, 25, 10);
    const PopularityTable pop = compute_popularity(corpus);
    const Segmentation seg = segment(pop, 1, 5);
    const auto subsets = build_subsets(corpus, seg);
    std::size_t lhs = 0;
    for (const auto& [m, dialogues] : subsets) lhs += dialogues.size();
    std::size_t rhs = 0;
    for (const Dialogue& d : corpus.dialogues) {
      for (const std::string& m : d.mentions)
        rhs += seg.body.count(m) + seg.tail.count(m);
    }
    CHECK(lhs == rhs);
  }
}

TEST_CASE("partition property: disjoint cover of mentioned movies") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const Corpus corpus = testutil::random_corpus(rng, 30, 12);
    const PopularityTable pop = compute_popularity(corpus);
    const std::int64_t tail_max = 1 + static_cast<std::int64_t>(rng.below(3));
    const std::int64_t body_max = tail_max + 1 + static_cast<std::int64_t>(rng.below(4));
    const Segmentation seg = segment(pop, tail_max, body_max);
    for (const auto& [movie, count] : pop.pop) {
      const int memberships = static_cast<int>(seg.head.count(movie)) +
                              static_cast<int>(seg.body.count(movie)) +
                              static_cast<int>(seg.tail.count(movie));
      CHECK(memberships == (count >= 1 ? 1 : 0));
      if (seg.tail.count(movie)) CHECK(count <= tail_max);
      if (seg.body.count(movie)) {
        CHECK(count > tail_max);
        CHECK(count <= body_max);
      }
      if (seg.head.count(movie)) CHECK(count > body_max);
    }
  }
}

TEST_CASE("popularity is invariant under dialogue order") {
  Rng rng(5);
  Corpus corpus = testutil::random_corpus(rng, 20, 8);
  const PopularityTable before = compute_popularity(corpus);
  std::reverse(corpus.dialogues.begin(), corpus.dialogues.end());
  const PopularityTable after = compute_popularity(corpus);
  CHECK(before.pop == after.pop);
}

TEST_CASE("stats: every movie mentioned once makes shares identical") {
  Corpus corpus = testutil::make_corpus({
      testutil::make_dialogue("d1", {"a"}, {"m1"}),
      testutil::make_dialogue("d2", {"b"}, {"m2"}),
      testutil::make_dialogue("d3", {"c"}, {"m3"}),
  });
  const Segmentation seg = segment(compute_popularity(corpus), 1, 5);
  const StatsReport report = corpus_stats(corpus, seg);
  CHECK(report.tail.title_share == doctest::Approx(report.tail.mention_share).epsilon(1e-12));
  CHECK(report.tail.title_share == doctest::Approx(1.0));
}

TEST_CASE("stats: single-movie corpus puts 100% in one group") {
  Corpus corpus = testutil::make_corpus({testutil::make_dialogue("d1", {"a"}, {"m1"})});
  const Segmentation seg = segment(compute_popularity(corpus), 1, 5);
  const StatsReport report = corpus_stats(corpus, seg);
  CHECK(report.tail.title_share == doctest::Approx(1.0));
  CHECK(report.head.title_share == doctest::Approx(0.0));
}

TEST_CASE("stats: share fixture reproduces the printed breakdown") {
  const testutil::ShareFixture fx = testutil::share_fixture();
  const PopularityTable pop = compute_popularity(fx.corpus);
  const Segmentation seg = segment(pop, 1, 5);
  const StatsReport report = corpus_stats(fx.corpus, seg);

  CHECK(report.head.titles == 107);
  CHECK(report.body.titles == 193);
  CHECK(report.tail.titles == 700);
  CHECK(report.head.title_share == 107.0 / 1000.0);
  CHECK(report.body.title_share == 193.0 / 1000.0);
  CHECK(report.tail.title_share == 700.0 / 1000.0);

  CHECK(report.head.mentions == 1289);
  CHECK(report.body.mentions == 676);
  CHECK(report.tail.mentions == 700);
  // at the printed 0.1% precision: 48.4 / 25.4 / 26.3
  CHECK(std::lround(report.head.mention_share * 1000.0) == 484);
  CHECK(std::lround(report.body.mention_share * 1000.0) == 254);
  CHECK(std::lround(report.tail.mention_share * 1000.0) == 263);

  const double share_sum =
      report.head.mention_share + report.body.mention_share + report.tail.mention_share;
  CHECK(share_sum == doctest::Approx(1.0).epsilon(1e-9));
  const double title_sum =
      report.head.title_share + report.body.title_share + report.tail.title_share;
  CHECK(title_sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("jsonl round-trip preserves dialogues and catalog") {
  Rng rng(77);
  const Corpus corpus = testutil::random_corpus(rng, 15, 6);
  const auto path = write_temp("lumi_corpus_rt.jsonl", to_jsonl(corpus));
  const Corpus back = ingest(path);
  REQUIRE(back.dialogues.size() == corpus.dialogues.size());
  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
    CHECK(back.dialogues[i].id == corpus.dialogues[i].id);
    CHECK(back.dialogues[i].mentions == corpus.dialogues[i].mentions);
    CHECK(back.dialogues[i].origin == corpus.dialogues[i].origin);
  }
  CHECK(back.catalog.size() == corpus.catalog.size());
  fs::remove(path);
}

}  // TEST_SUITE
