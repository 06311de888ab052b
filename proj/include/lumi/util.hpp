#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lumi {

// Error taxonomy used across the toolkit. `kind` feeds the CLI's structured
// stderr JSON and keeps exit-code mapping in one place.
enum class ErrorKind {
  io,
  parse,
  config,
  invariant,
  not_found,
  conflict,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  const char* kind_name() const;

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// 64-bit FNV-1a. Stable across platforms; used for feature hashing and for
// deriving per-module RNG streams from the run seed.
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed);

// Deterministic RNG. All bounded draws are rejection-sampled and reals use
// the top 53 bits, so sequences do not depend on libstdc++ internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t range(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1).
  double real();

  // Independent stream labelled by (parent seed, label).
  static Rng derive(std::uint64_t seed, std::string_view label);

 private:
  std::mt19937_64 engine_;
};

// Pairwise (cascade) summation: deterministic reduction order and better
// rounding than a running sum.
double pairwise_sum(std::span<const double> values);

// Tokenization. `tokenize` lowercases and splits on anything that is not
// ASCII alphanumeric (bytes >= 0x80 are kept so UTF-8 words survive intact).
// `whitespace_tokens` only case-folds and splits on whitespace; the text
// metrics are specified against that scheme.
std::vector<std::string> tokenize(std::string_view text);
std::vector<std::string> whitespace_tokens(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// SHA-256 (OpenSSL EVP), hex-encoded.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Write via temp file + rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string utc_timestamp();

}  // namespace lumi
