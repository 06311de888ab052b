#include <filesystem>

#include "doctest.h"
#include "lumi/config.hpp"
#include "lumi/util.hpp"

using namespace lumi;
namespace fs = std::filesystem;

TEST_SUITE("config") {

TEST_CASE("parser handles scalars, arrays, sections and comments") {
  const std::string text = R"(# top comment
title = "lumi run"  # trailing comment
count = 42
ratio = 0.25
flag = true

[loss]
gamma = 2.5
k = 0.25

[eval]
k = [1, 10, 50]
names = ["a", "b"]
)";
  const auto table = parse_config_text(text);
  CHECK(table.at("title").str == "lumi run");
  CHECK(table.at("count").integer == 42);
  CHECK(table.at("ratio").real == doctest::Approx(0.25));
  CHECK(table.at("flag").boolean == true);
  CHECK(table.at("loss.gamma").as_real() == doctest::Approx(2.5));
  CHECK(table.at("eval.k").items.size() == 3);
  CHECK(table.at("eval.k").items[1].integer == 10);
  CHECK(table.at("eval.names").items[0].str == "a");
}

TEST_CASE("parser rejects malformed lines") {
  CHECK_THROWS_AS(parse_config_text("just words\n"), Error);
  CHECK_THROWS_AS(parse_config_text("[unclosed\n"), Error);
  CHECK_THROWS_AS(parse_config_text("x = [1, 2\n"), Error);
  CHECK_THROWS_AS(parse_config_text("x = 1.2.3\n"), Error);
  CHECK_THROWS_AS(parse_config_text("= 3\n"), Error);
}

TEST_CASE("defaults carry the tuned hyperparameters") {
  const RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.loss.gamma == doctest::Approx(2.5));
  CHECK(cfg.loss.alpha == doctest::Approx(0.6));
  CHECK(cfg.loss.k == doctest::Approx(0.25));
  CHECK(cfg.support_k == 50);
  CHECK(cfg.augment.rho == doctest::Approx(0.3));
  CHECK(cfg.augment.temperature == doctest::Approx(0.7));  // run default
  CHECK(AugmentConfig{}.temperature == doctest::Approx(0.8));  // type default
  CHECK(cfg.k_values == std::vector<int>{1, 10, 50});
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config file overrides defaults field by field") {
  RunConfig cfg = RunConfig::defaults();
  cfg.apply(parse_config_text(R"(
[segmentation]
tail_max = 2
body_max = 9

[loss]
gamma = 3.0
mask_direction = "leq_tau"
adaptive = false

[prototype]
K = 7
w_sem = 0.7
w_emo = 0.1
w_mov = 0.1
w_int = 0.1

[eval]
k = [1, 5]

[run]
seed = 99
)"));
  CHECK(cfg.tail_max == 2);
  CHECK(cfg.body_max == 9);
  CHECK(cfg.loss.gamma == doctest::Approx(3.0));
  CHECK(cfg.loss.alpha == doctest::Approx(0.6));  // untouched default
  CHECK(cfg.loss.mask_direction == MaskDirection::leq_tau);
  CHECK(cfg.loss.adaptive == false);
  CHECK(cfg.support_k == 7);
  CHECK(cfg.weights.sem == doctest::Approx(0.7));
  CHECK(cfg.k_values == std::vector<int>{1, 5});
  CHECK(cfg.seed == 99);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("validate rejects inconsistent settings") {
  RunConfig cfg = RunConfig::defaults();
  cfg.k_values = {10, 1};
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = RunConfig::defaults();
  cfg.corpus_path = "/definitely/not/here.jsonl";
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = RunConfig::defaults();
  cfg.embedder = "remote";  // without a url
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg = RunConfig::defaults();
  cfg.weights.sem = 0.9;  // weights no longer sum to 1
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("snapshot is deterministic and hash-stable") {
  const RunConfig a = RunConfig::defaults();
  const RunConfig b = RunConfig::defaults();
  CHECK(a.snapshot_json() == b.snapshot_json());
  CHECK(sha256_hex(a.snapshot_json()) == sha256_hex(b.snapshot_json()));
  RunConfig c = RunConfig::defaults();
  c.seed = 1234;
  CHECK(a.snapshot_json() != c.snapshot_json());
}

TEST_CASE("manifest digests recompute") {
  const fs::path input = fs::temp_directory_path() / "lumi_manifest_in.txt";
  atomic_write_file(input, "input bytes");
  RunManifest manifest;
  manifest.tool_version = "test";
  manifest.add_input(input);
  REQUIRE(manifest.inputs.size() == 1);
  CHECK(manifest.inputs[0].sha256 == sha256_file_hex(input));
  CHECK(manifest.inputs[0].sha256 == sha256_hex("input bytes"));

  const fs::path out = fs::temp_directory_path() / "lumi_manifest.json";
  manifest.write(out);
  const std::string payload = read_file(out);
  CHECK(payload.find("tool_version") != std::string::npos);
  CHECK(payload.find(manifest.inputs[0].sha256) != std::string::npos);
  fs::remove(input);
  fs::remove(out);
}

}  // TEST_SUITE
