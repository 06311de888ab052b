#include "lumi/augment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace lumi {

using nlohmann::json;

const char* tier_name(Tier tier) { return tier == Tier::tail ? "tail" : "body"; }

const char* candidate_state_name(CandidateState s) {
  switch (s) {
    case CandidateState::generated: return "generated";
    case CandidateState::filtered_out: return "filtered_out";
    case CandidateState::accepted: return "accepted";
    case CandidateState::in_review: return "in_review";
    case CandidateState::discarded: return "discarded";
  }
  return "generated";
}

CandidateState candidate_state_from_name(const std::string& name) {
  for (CandidateState s : {CandidateState::generated, CandidateState::filtered_out,
                           CandidateState::accepted, CandidateState::in_review,
                           CandidateState::discarded}) {
    if (name == candidate_state_name(s)) return s;
  }
  fail(ErrorKind::parse, "unknown candidate state: " + name);
}

void AugmentConfig::validate() const {
  if (!(0 <= review_min && review_min < accept_min && accept_min <= judge_count))
    fail(ErrorKind::config, "AugmentConfig: need 0 <= review_min < accept_min <= judge_count");
  if (!(filter_threshold > 0.0 && filter_threshold <= 1.0))
    fail(ErrorKind::config, "AugmentConfig: filter_threshold must be in (0, 1]");
  if (!(rho >= 0.0 && rho <= 1.0)) fail(ErrorKind::config, "AugmentConfig: rho must be in [0, 1]");
  if (tail_count_min < 1 || tail_count_min > tail_count_max ||
      body_count_min < 1 || body_count_min > body_count_max)
    fail(ErrorKind::config, "AugmentConfig: invalid generation count ranges");
  if (max_in_flight < 1) fail(ErrorKind::config, "AugmentConfig: max_in_flight must be >= 1");
  if (retry_attempts < 1) fail(ErrorKind::config, "AugmentConfig: retry_attempts must be >= 1");
}

// ---------------------------------------------------------------------------
// Mock backends
// ---------------------------------------------------------------------------

namespace {

const char* kSeekerWords[] = {"something", "really", "slow", "dark", "light", "classic",
                              "recent",    "family", "weird", "long", "short", "quiet"};
const char* kTopics[] = {"thriller", "comedy", "drama",   "romance", "horror",
                         "mystery",  "sci-fi", "western", "musical", "documentary"};
const char* kReactions[] = {"that sounds great",      "i have not seen that one",
                            "interesting choice",     "maybe something else",
                            "i loved that suggestion", "tell me more about it"};

std::string mock_sentence(Rng& rng) {
  std::ostringstream out;
  out << "i want " << kSeekerWords[rng.below(std::size(kSeekerWords))] << " "
      << kTopics[rng.below(std::size(kTopics))] << " movies with a "
      << kSeekerWords[rng.below(std::size(kSeekerWords))] << " mood";
  return out.str();
}

// Section of the prompt between the prototype marker and the next blank line.
std::string prototype_section(const std::string& prompt) {
  const std::string marker = "Prototype dialogue:\n";
  const auto begin = prompt.find(marker);
  if (begin == std::string::npos) return {};
  const auto body = begin + marker.size();
  const auto end = prompt.find("\n\n", body);
  return prompt.substr(body, end == std::string::npos ? std::string::npos : end - body);
}

}  // namespace

ChatResult MockChatClient::complete(const std::string& prompt, double temperature,
                                    std::uint64_t seed) {
  const std::uint64_t prompt_hash = fnv1a64(prompt);
  if (fail_first_attempts_ > 0) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    int& attempts = attempts_[prompt_hash ^ seed];
    if (attempts < fail_first_attempts_) {
      ++attempts;
      return {false, "", "mock transport failure"};
    }
  }
  (void)temperature;
  Rng rng(prompt_hash ^ (seed * 0x9e3779b97f4a7c15ull));

  // Roughly one in seven responses parrots the prototype, so the similarity
  // filter has real work to do under the mock.
  if (rng.below(7) == 0) {
    const std::string proto = prototype_section(prompt);
    if (!proto.empty())
      return {true, proto + "\nSEEKER: " + mock_sentence(rng), ""};
  }

  std::ostringstream out;
  const std::int64_t pairs = rng.range(2, 3);
  for (std::int64_t i = 0; i < pairs; ++i) {
    out << "SEEKER: " << mock_sentence(rng) << "\n";
    out << "RECOMMENDER: you could try the " << kTopics[rng.below(std::size(kTopics))]
        << " i mentioned, " << kReactions[rng.below(std::size(kReactions))] << "\n";
  }
  out << "SEEKER: " << kReactions[rng.below(std::size(kReactions))];
  return {true, out.str(), ""};
}

JudgeVerdict MockJudge::judge(const Candidate& candidate) {
  JudgeVerdict v;
  v.judge_id = id_;
  const std::uint64_t h = fnv1a64(candidate.text, fnv1a64(id_));
  const auto unit = [h](int slot) {
    return static_cast<double>((h >> (slot * 16)) & 0xffff) / 65535.0;
  };
  v.consistency = 0.35 + 0.65 * unit(0);
  v.fluency = 0.35 + 0.65 * unit(1);
  v.plausibility = 0.35 + 0.65 * unit(2);
  v.pass = v.consistency >= 0.5 && v.fluency >= 0.5 && v.plausibility >= 0.5;
  return v;
}

JudgeVerdict ScriptedJudge::judge(const Candidate& candidate) {
  (void)candidate;
  JudgeVerdict v;
  v.judge_id = id_;
  if (error_) {
    v.error = "scripted judge failure";
    v.pass = false;
    return v;
  }
  const double score = pass_ ? 0.9 : 0.1;
  v.consistency = v.fluency = v.plausibility = score;
  v.pass = pass_;
  return v;
}

// ---------------------------------------------------------------------------
// Review queue
// ---------------------------------------------------------------------------

const char* review_resolution_name(ReviewResolution r) {
  switch (r) {
    case ReviewResolution::pending: return "pending";
    case ReviewResolution::approved: return "approved";
    case ReviewResolution::rejected: return "rejected";
  }
  return "pending";
}

ReviewResolution review_resolution_from_name(const std::string& name) {
  if (name == "pending") return ReviewResolution::pending;
  if (name == "approved") return ReviewResolution::approved;
  if (name == "rejected") return ReviewResolution::rejected;
  fail(ErrorKind::parse, "unknown review resolution: " + name);
}

ReviewQueue ReviewQueue::load(const std::filesystem::path& path) {
  ReviewQueue queue;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open review queue: " + path.string());
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::parse, "review queue line " + std::to_string(line_number) + ": " + e.what());
    }
    ReviewQueueEntry entry;
    entry.candidate_id = doc.at("candidate_id").get<std::string>();
    entry.pass_count = doc.at("pass_count").get<int>();
    entry.created_at = doc.value("created_at", std::string{});
    entry.resolution = review_resolution_from_name(doc.value("resolution", "pending"));
    queue.entries_.push_back(std::move(entry));
  }
  return queue;
}

void ReviewQueue::save(const std::filesystem::path& path) const {
  std::string out;
  for (const ReviewQueueEntry& entry : entries_) {
    json doc{{"candidate_id", entry.candidate_id},
             {"pass_count", entry.pass_count},
             {"created_at", entry.created_at},
             {"resolution", review_resolution_name(entry.resolution)}};
    out += doc.dump();
    out.push_back('\n');
  }
  atomic_write_file(path, out);
}

void ReviewQueue::add(ReviewQueueEntry entry) { entries_.push_back(std::move(entry)); }

ReviewQueueEntry& ReviewQueue::resolve(const std::string& candidate_id,
                                       ReviewResolution decision) {
  if (decision == ReviewResolution::pending)
    fail(ErrorKind::config, "resolve: decision must be approved or rejected");
  for (ReviewQueueEntry& entry : entries_) {
    if (entry.candidate_id != candidate_id) continue;
    if (entry.resolution != ReviewResolution::pending)
      fail(ErrorKind::conflict, "review entry already resolved: " + candidate_id);
    entry.resolution = decision;
    return entry;
  }
  fail(ErrorKind::not_found, "no review entry for candidate: " + candidate_id);
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

namespace {

std::string transcript_of(const Dialogue& d) {
  std::ostringstream out;
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    const Utterance& u = d.utterances[i];
    if (i > 0) out << "\n";
    out << (u.speaker_id.empty() ? "U" + std::to_string(u.turn_index) : u.speaker_id) << ": "
        << u.text;
  }
  return out.str();
}

std::string padded_index(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return buf;
}

}  // namespace

std::string build_prompt(const Prototype& proto, const SupportSet& neighbors,
                         const Corpus& corpus, const std::string& movie_title,
                         std::size_t max_neighbors) {
  const Dialogue* proto_dialogue = corpus.find_dialogue(proto.dialogue_id);
  if (proto_dialogue == nullptr)
    fail(ErrorKind::not_found, "build_prompt: prototype dialogue missing: " + proto.dialogue_id);

  std::ostringstream out;
  out << "You write natural multi-turn movie recommendation dialogues between a SEEKER "
         "and a RECOMMENDER.\n\n";
  out << "Prototype dialogue:\n" << transcript_of(*proto_dialogue) << "\n\n";
  std::size_t used = 0;
  for (const auto& [dialogue_id, score] : neighbors.neighbors) {
    if (used >= max_neighbors) break;
    const Dialogue* d = corpus.find_dialogue(dialogue_id);
    if (d == nullptr) continue;
    out << "Similar dialogue " << (used + 1) << ":\n" << transcript_of(*d) << "\n\n";
    ++used;
  }
  out << "Task: write one new multi-turn recommendation dialogue in the same style that "
         "explicitly mentions \""
      << movie_title
      << "\" and recommends it. Use alternating lines starting with 'SEEKER:' and "
         "'RECOMMENDER:'.";
  return out.str();
}

std::vector<Candidate> generate(const std::string& prompt, const std::string& movie_id,
                                Tier tier, const AugmentConfig& cfg, ChatClient& client,
                                Rng& rng) {
  cfg.validate();
  const std::int64_t count = tier == Tier::tail
                                 ? rng.range(cfg.tail_count_min, cfg.tail_count_max)
                                 : rng.range(cfg.body_count_min, cfg.body_count_max);
  const std::uint64_t prompt_hash = fnv1a64(prompt);

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
  for (auto& s : seeds) s = rng.next_u64();

  std::vector<ChatResult> results(seeds.size());
  // Requests run in waves of max_in_flight; results commit by index so the
  // output order never depends on scheduling.
  for (std::size_t start = 0; start < seeds.size();
       start += static_cast<std::size_t>(cfg.max_in_flight)) {
    const std::size_t end =
        std::min(seeds.size(), start + static_cast<std::size_t>(cfg.max_in_flight));
    std::vector<std::future<ChatResult>> inflight;
    for (std::size_t i = start; i < end; ++i) {
      inflight.push_back(std::async(std::launch::async, [&, i]() {
        ChatResult last;
        for (int attempt = 0; attempt < cfg.retry_attempts; ++attempt) {
          if (attempt > 0 && cfg.retry_backoff_ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg.retry_backoff_ms << (attempt - 1)));
          }
          last = client.complete(prompt, cfg.temperature, seeds[i]);
          if (last.ok) break;
        }
        return last;
      }));
    }
    for (std::size_t i = start; i < end; ++i) results[i] = inflight[i - start].get();
  }

  std::vector<Candidate> candidates;
  candidates.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok)
      fail(ErrorKind::io, "generation failed for movie " + movie_id + " after " +
                              std::to_string(cfg.retry_attempts) + " attempts: " +
                              results[i].error);
    Candidate c;
    c.id = movie_id + "#" + padded_index(i);
    c.movie_id = movie_id;
    c.tier = tier;
    c.prompt_hash = prompt_hash;
    c.text = results[i].text;
    c.temperature = cfg.temperature;
    c.state = CandidateState::generated;
    candidates.push_back(std::move(c));
  }
  return candidates;
}

void similarity_filter(std::vector<Candidate>& candidates, const Prototype& proto,
                       double threshold, const Embedder& embedder) {
  for (Candidate& c : candidates) {
    if (c.state != CandidateState::generated) continue;
    c.sim_to_prototype = cosine(embedder.embed(c.text), proto.semantic);
    if (c.sim_to_prototype > threshold) c.state = CandidateState::filtered_out;
  }
}

void judge_and_route(Candidate& candidate, const std::vector<std::unique_ptr<Judge>>& judges,
                     const AugmentConfig& cfg, ReviewQueue& queue) {
  cfg.validate();
  if (static_cast<int>(judges.size()) != cfg.judge_count)
    fail(ErrorKind::config, "judge_and_route: expected " + std::to_string(cfg.judge_count) +
                                " judges, got " + std::to_string(judges.size()));
  if (candidate.state != CandidateState::generated) return;

  candidate.votes.clear();
  candidate.pass_count = 0;
  for (const auto& judge : judges) {
    JudgeVerdict v;
    try {
      v = judge->judge(candidate);
    } catch (const std::exception& e) {
      v.judge_id = judge->id();
      v.pass = false;
      v.error = e.what();
    }
    if (!v.error.empty()) v.pass = false;  // fail-closed
    candidate.pass_count += v.pass ? 1 : 0;
    candidate.votes.push_back(std::move(v));
  }

  if (candidate.pass_count >= cfg.accept_min) {
    candidate.state = CandidateState::accepted;
  } else if (candidate.pass_count >= cfg.review_min) {
    candidate.state = CandidateState::in_review;
    queue.add({candidate.id, candidate.pass_count, utc_timestamp(), ReviewResolution::pending});
  } else {
    candidate.state = CandidateState::discarded;
  }
}

namespace {

std::optional<std::vector<Utterance>> parse_transcript(const std::string& text) {
  std::vector<Utterance> utterances;
  std::istringstream in(text);
  std::string line;
  int turn = 0;
  while (std::getline(in, line)) {
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto colon = trimmed.find(':');
    if (colon == std::string::npos || colon == 0) return std::nullopt;
    Utterance u;
    u.speaker_id = trim(trimmed.substr(0, colon));
    u.text = trim(trimmed.substr(colon + 1));
    if (u.text.empty()) return std::nullopt;
    u.turn_index = turn++;
    utterances.push_back(std::move(u));
  }
  if (utterances.size() < 2) return std::nullopt;
  return utterances;
}

}  // namespace

IntegrationReport integrate(const std::vector<Candidate>& accepted, const Corpus& corpus,
                            double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) fail(ErrorKind::config, "integrate: rho must be in [0, 1]");
  IntegrationReport report;
  report.corpus = corpus;

  std::vector<const Candidate*> parseable;
  std::vector<std::pair<const Candidate*, std::vector<Utterance>>> parsed;
  for (const Candidate& c : accepted) {
    if (c.state != CandidateState::accepted)
      fail(ErrorKind::invariant, "integrate: candidate " + c.id + " is not accepted");
    auto utterances = parse_transcript(c.text);
    if (!utterances) {
      report.skipped_unparseable.push_back(c.id);
      continue;
    }
    parsed.emplace_back(&c, std::move(*utterances));
  }

  // Global cap: keep the strongest-voted candidates, ties broken by id.
  const auto cap = static_cast<std::size_t>(
      std::floor(rho * static_cast<double>(corpus.dialogues.size())));
  std::sort(parsed.begin(), parsed.end(), [](const auto& a, const auto& b) {
    if (a.first->pass_count != b.first->pass_count)
      return a.first->pass_count > b.first->pass_count;
    return a.first->id < b.first->id;
  });
  if (parsed.size() > cap) {
    for (std::size_t i = cap; i < parsed.size(); ++i)
      report.dropped_by_cap.push_back(parsed[i].first->id);
    parsed.resize(cap);
  }
  std::sort(parsed.begin(), parsed.end(),
            [](const auto& a, const auto& b) { return a.first->id < b.first->id; });

  std::set<std::string> existing_ids;
  for (const Dialogue& d : corpus.dialogues) existing_ids.insert(d.id);

  for (auto& [candidate, utterances] : parsed) {
    Dialogue d;
    d.id = "aug-" + candidate->id;
    if (!existing_ids.insert(d.id).second)
      fail(ErrorKind::invariant, "integrate: dialogue id collision: " + d.id);
    d.utterances = std::move(utterances);
    d.origin = candidate->tier == Tier::tail ? Origin::augmented_tail : Origin::augmented_body;
    d.mentions.insert(candidate->movie_id);
    for (const Utterance& u : d.utterances) {
      for (const std::string& ref : inline_movie_refs(u.text)) {
        if (corpus.catalog.count(ref)) d.mentions.insert(ref);
      }
    }
    report.corpus.dialogues.push_back(std::move(d));
    ++report.added;
  }
  return report;
}

AugmentationOutcome run_augmentation(const Corpus& corpus, const Segmentation& seg,
                                     const AugmentConfig& cfg, const SimilarityWeights& weights,
                                     std::size_t support_k, ChatClient& client,
                                     const std::vector<std::unique_ptr<Judge>>& judges,
                                     const Embedder& embedder, const EmotionLexicon& lexicon,
                                     std::uint64_t seed) {
  cfg.validate();
  AugmentationOutcome outcome;
  const FeatureIndex index = FeatureIndex::build(corpus, embedder, lexicon);
  const auto subsets = build_subsets(corpus, seg);

  for (const auto& [movie_id, dialogue_indices] : subsets) {
    if (dialogue_indices.empty()) continue;
    const Tier tier = seg.is_tail(movie_id) ? Tier::tail : Tier::body;
    try {
      const Prototype proto = select_prototype(movie_id, dialogue_indices, index);
      const SupportSet support = top_k_neighbors(proto, index, support_k, weights);
      auto title_it = corpus.catalog.find(movie_id);
      const std::string title =
          title_it == corpus.catalog.end() || title_it->second.empty() ? movie_id
                                                                       : title_it->second;
      const std::string prompt = build_prompt(proto, support, corpus, title);
      Rng rng = Rng::derive(seed, "augment:" + movie_id);
      std::vector<Candidate> candidates = generate(prompt, movie_id, tier, cfg, client, rng);
      similarity_filter(candidates, proto, cfg.filter_threshold, embedder);
      for (Candidate& c : candidates) judge_and_route(c, judges, cfg, outcome.queue);
      for (Candidate& c : candidates) outcome.candidates.push_back(std::move(c));
    } catch (const Error& e) {
      outcome.movie_errors.emplace_back(movie_id, e.what());
    }
  }

  std::vector<Candidate> accepted;
  for (const Candidate& c : outcome.candidates) {
    if (c.state == CandidateState::accepted) accepted.push_back(c);
  }
  outcome.integration = integrate(accepted, corpus, cfg.rho);
  return outcome;
}

std::string candidates_to_json_string(const std::vector<Candidate>& candidates) {
  json arr = json::array();
  for (const Candidate& c : candidates) {
    json votes = json::array();
    for (const JudgeVerdict& v : c.votes) {
      votes.push_back({{"judge_id", v.judge_id},
                       {"pass", v.pass},
                       {"consistency", v.consistency},
                       {"fluency", v.fluency},
                       {"plausibility", v.plausibility},
                       {"error", v.error}});
    }
    arr.push_back({{"id", c.id},
                   {"movie_id", c.movie_id},
                   {"tier", tier_name(c.tier)},
                   {"prompt_hash", c.prompt_hash},
                   {"text", c.text},
                   {"temperature", c.temperature},
                   {"sim_to_prototype", c.sim_to_prototype},
                   {"state", candidate_state_name(c.state)},
                   {"pass_count", c.pass_count},
                   {"votes", votes}});
  }
  return arr.dump(2);
}

std::vector<Candidate> candidates_from_json_string(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, std::string("candidates json: ") + e.what());
  }
  std::vector<Candidate> candidates;
  for (const json& item : arr) {
    Candidate c;
    c.id = item.at("id").get<std::string>();
    c.movie_id = item.at("movie_id").get<std::string>();
    c.tier = item.at("tier").get<std::string>() == "tail" ? Tier::tail : Tier::body;
    c.prompt_hash = item.at("prompt_hash").get<std::uint64_t>();
    c.text = item.at("text").get<std::string>();
    c.temperature = item.at("temperature").get<double>();
    c.sim_to_prototype = item.at("sim_to_prototype").get<double>();
    c.state = candidate_state_from_name(item.at("state").get<std::string>());
    c.pass_count = item.at("pass_count").get<int>();
    for (const json& vote : item.at("votes")) {
      JudgeVerdict v;
      v.judge_id = vote.at("judge_id").get<std::string>();
      v.pass = vote.at("pass").get<bool>();
      v.consistency = vote.at("consistency").get<double>();
      v.fluency = vote.at("fluency").get<double>();
      v.plausibility = vote.at("plausibility").get<double>();
      v.error = vote.value("error", std::string{});
      c.votes.push_back(std::move(v));
    }
    candidates.push_back(std::move(c));
  }
  return candidates;
}

}  // namespace lumi
