#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lumi/augment.hpp"
#include "lumi/losses.hpp"
#include "lumi/prototype.hpp"
#include "lumi/trainer.hpp"

namespace lumi {

// Minimal TOML-subset value: strings, integers, reals, booleans and flat
// arrays of those. Exactly the grammar documented in the README.
struct ConfigValue {
  enum class Kind { string, integer, real, boolean, array };
  Kind kind = Kind::string;
  std::string str;
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<ConfigValue> items;

  double as_real() const;  // integers promote
};

// Keys are "section.key" (or bare "key" before any section header).
std::map<std::string, ConfigValue> parse_config_text(const std::string& text);

struct RunConfig {
  std::string corpus_path;

  std::int64_t tail_max = 1;
  std::int64_t body_max = 5;
  bool quartile = false;

  std::size_t embed_dim = 256;
  std::string embedder = "hashed";  // "hashed" | "remote"
  std::string remote_embed_url;
  std::string remote_embed_model = "text-embedding";
  std::string lexicon_path = LUMI_BUNDLED_LEXICON;

  AcflConfig loss;
  SimilarityWeights weights;
  std::size_t support_k = 50;
  std::string prototype_strategy = "medoid";

  AugmentConfig augment;
  std::string chat_url;  // empty -> mock client
  std::string chat_model = "gpt-4o";

  std::vector<int> k_values = {1, 10, 50};
  std::string out_dir = "out";
  std::uint64_t seed = 17;

  SyntheticSpec synthetic;
  TrainOptions train;
  int experiment_seeds = 5;

  // Built-in defaults are the tuned setting: gamma=2.5, alpha=0.6, k=0.25,
  // K=50, rho=0.3, temperature=0.7 (the AugmentConfig type itself defaults
  // to 0.8 as a plain generation default).
  static RunConfig defaults();
  static RunConfig from_file(const std::filesystem::path& path);

  void apply(const std::map<std::string, ConfigValue>& table);
  void validate() const;

  // Canonical JSON snapshot; its SHA-256 is the manifest config hash.
  std::string snapshot_json() const;
};

struct ManifestFile {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
  std::string subcommand;
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> artifacts;

  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);
  std::string to_json_string() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace lumi
