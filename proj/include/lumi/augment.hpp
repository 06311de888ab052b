#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lumi/corpus.hpp"
#include "lumi/embed.hpp"
#include "lumi/prototype.hpp"
#include "lumi/util.hpp"

namespace lumi {

enum class Tier { tail, body };
const char* tier_name(Tier tier);

enum class CandidateState { generated, filtered_out, accepted, in_review, discarded };
const char* candidate_state_name(CandidateState s);
CandidateState candidate_state_from_name(const std::string& name);

struct AugmentConfig {
  double temperature = 0.8;
  int tail_count_min = 8;
  int tail_count_max = 10;
  int body_count_min = 4;
  int body_count_max = 5;
  double filter_threshold = 0.85;  // strictly greater than this is discarded
  int judge_count = 5;
  int accept_min = 4;   // pass_count >= accept_min        -> accepted
  int review_min = 2;   // review_min <= pass_count < accept_min -> human review
  double rho = 0.3;     // global cap: augmented <= rho * |original|
  int max_in_flight = 4;
  int retry_attempts = 3;
  int retry_backoff_ms = 500;  // doubled per attempt

  void validate() const;
};

struct JudgeVerdict {
  std::string judge_id;
  bool pass = false;
  double consistency = 0.0;
  double fluency = 0.0;
  double plausibility = 0.0;
  std::string error;  // non-empty when the judge failed (counts as pass=false)
};

struct Candidate {
  std::string id;  // "<movie_id>#<index>"
  std::string movie_id;
  Tier tier = Tier::tail;
  std::uint64_t prompt_hash = 0;
  std::string text;  // multi-turn transcript, "Speaker: text" lines
  double temperature = 0.0;
  double sim_to_prototype = 0.0;
  CandidateState state = CandidateState::generated;
  std::vector<JudgeVerdict> votes;
  int pass_count = 0;
};

struct ChatResult {
  bool ok = false;
  std::string text;
  std::string error;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResult complete(const std::string& prompt, double temperature,
                              std::uint64_t seed) = 0;
};

// Deterministic offline generator: the transcript is a pure function of
// (prompt hash, per-candidate seed). `fail_first_attempts` simulates flaky
// transport for retry tests.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(int fail_first_attempts = 0)
      : fail_first_attempts_(fail_first_attempts) {}
  ChatResult complete(const std::string& prompt, double temperature,
                      std::uint64_t seed) override;

 private:
  int fail_first_attempts_;
  std::map<std::uint64_t, int> attempts_;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string id() const = 0;
  // Scores in [0, 1]; pass = all three >= 0.5.
  virtual JudgeVerdict judge(const Candidate& candidate) = 0;
};

// Deterministic scores derived from (judge id, candidate text).
class MockJudge : public Judge {
 public:
  explicit MockJudge(std::string judge_id) : id_(std::move(judge_id)) {}
  std::string id() const override { return id_; }
  JudgeVerdict judge(const Candidate& candidate) override;

 private:
  std::string id_;
};

// Fixed verdict per call; used to pin exact pass counts in tests.
class ScriptedJudge : public Judge {
 public:
  ScriptedJudge(std::string judge_id, bool pass, bool error = false)
      : id_(std::move(judge_id)), pass_(pass), error_(error) {}
  std::string id() const override { return id_; }
  JudgeVerdict judge(const Candidate& candidate) override;

 private:
  std::string id_;
  bool pass_;
  bool error_;
};

// OpenAI-compatible HTTP backends; API key from LUMI_API_KEY.
std::unique_ptr<ChatClient> make_http_chat_client(const std::string& url,
                                                  const std::string& model);
std::unique_ptr<Judge> make_http_judge(const std::string& judge_id, const std::string& url,
                                       const std::string& model);

enum class ReviewResolution { pending, approved, rejected };
const char* review_resolution_name(ReviewResolution r);
ReviewResolution review_resolution_from_name(const std::string& name);

struct ReviewQueueEntry {
  std::string candidate_id;
  int pass_count = 0;
  std::string created_at;
  ReviewResolution resolution = ReviewResolution::pending;
};

class ReviewQueue {
 public:
  static ReviewQueue load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;  // atomic rewrite

  void add(ReviewQueueEntry entry);
  // approved/rejected only; unknown id or double resolution is an error.
  ReviewQueueEntry& resolve(const std::string& candidate_id, ReviewResolution decision);

  const std::vector<ReviewQueueEntry>& entries() const { return entries_; }

 private:
  std::vector<ReviewQueueEntry> entries_;
};

// Stage 1: deterministic prompt from prototype transcript, up to three
// neighbor transcripts, and a directive naming the movie title once.
std::string build_prompt(const Prototype& proto, const SupportSet& neighbors,
                         const Corpus& corpus, const std::string& movie_title,
                         std::size_t max_neighbors = 3);

// Stage 2: frequency-aware generation. Throws Error after exhausting
// retries; the pipeline records it per movie and carries on.
std::vector<Candidate> generate(const std::string& prompt, const std::string& movie_id,
                                Tier tier, const AugmentConfig& cfg, ChatClient& client,
                                Rng& rng);

// Stage 3: sim = cosine(embed(text), prototype.semantic); strictly greater
// than the threshold is discarded, equality kept.
void similarity_filter(std::vector<Candidate>& candidates, const Prototype& proto,
                       double threshold, const Embedder& embedder);

// Stage 4: five-judge voting and routing; in_review candidates enter `queue`.
void judge_and_route(Candidate& candidate, const std::vector<std::unique_ptr<Judge>>& judges,
                     const AugmentConfig& cfg, ReviewQueue& queue);

struct IntegrationReport {
  Corpus corpus;
  std::vector<std::string> skipped_unparseable;  // candidate ids
  std::vector<std::string> dropped_by_cap;       // candidate ids
  std::int64_t added = 0;
};

// Stage 5: parse accepted transcripts into dialogues tagged by tier origin,
// cap the total at rho * |original| (dropping lowest pass_count first, then
// by id), and append. The catalog is left untouched.
IntegrationReport integrate(const std::vector<Candidate>& accepted, const Corpus& corpus,
                            double rho);

struct AugmentationOutcome {
  std::vector<Candidate> candidates;
  ReviewQueue queue;
  IntegrationReport integration;
  std::vector<std::pair<std::string, std::string>> movie_errors;  // movie_id -> message
};

// Full pipeline over every body/tail movie (deterministic movie order).
AugmentationOutcome run_augmentation(const Corpus& corpus, const Segmentation& seg,
                                     const AugmentConfig& cfg, const SimilarityWeights& weights,
                                     std::size_t support_k, ChatClient& client,
                                     const std::vector<std::unique_ptr<Judge>>& judges,
                                     const Embedder& embedder, const EmotionLexicon& lexicon,
                                     std::uint64_t seed);

std::string candidates_to_json_string(const std::vector<Candidate>& candidates);
std::vector<Candidate> candidates_from_json_string(const std::string& text);

}  // namespace lumi
