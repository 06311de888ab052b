#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace lumi {

enum class Origin { original, augmented_tail, augmented_body };

const char* origin_name(Origin origin);
Origin origin_from_name(const std::string& name);

struct Utterance {
  std::string speaker_id;
  std::string text;
  int turn_index = 0;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
  std::set<std::string> mentions;  // movie ids, subset of the corpus catalog
  Origin origin = Origin::original;

  // Whole-sample text: all utterances joined by newline. Similarity and
  // augmentation score dialogues as units, not per turn.
  std::string joined_text() const;
};

// Non-fatal ingestion findings (e.g. "@123" in an utterance but absent from
// the movieMentions map). Kept on the corpus so nothing is dropped silently.
struct IngestWarning {
  std::size_t line_number = 0;
  std::string dialogue_id;
  std::string message;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  std::map<std::string, std::string> catalog;  // movie id -> display title
  std::vector<IngestWarning> warnings;

  const Dialogue* find_dialogue(const std::string& id) const;
};

struct PopularityTable {
  // pop(m) = number of dialogues whose mention set contains m. Movies in the
  // catalog that are never mentioned carry an explicit 0.
  std::map<std::string, std::int64_t> pop;

  std::int64_t of(const std::string& movie_id) const;
};

struct Segmentation {
  std::set<std::string> head;
  std::set<std::string> body;
  std::set<std::string> tail;
  std::int64_t tail_max = 1;
  std::int64_t body_max = 5;

  bool is_tail(const std::string& movie_id) const { return tail.count(movie_id) > 0; }
};

struct GroupStats {
  std::int64_t titles = 0;
  std::int64_t mentions = 0;
  double title_share = 0.0;
  double mention_share = 0.0;
};

struct StatsReport {
  GroupStats head;
  GroupStats body;
  GroupStats tail;
  std::int64_t total_titles = 0;    // mentioned titles only
  std::int64_t total_mentions = 0;  // sum of pop over mentioned titles
  std::int64_t catalog_size = 0;
  std::int64_t dialogues = 0;

  std::string to_json_string() const;
  std::string to_markdown() const;
};

// "@<digits>" movie references appearing inline in utterance text.
std::vector<std::string> inline_movie_refs(const std::string& text);

// Parse a UTF-8 JSON-lines corpus file. One dialogue per line:
//   {"conversationId": str,
//    "messages": [{"senderWorkerId": str, "text": str}],
//    "movieMentions": {movieId: title},
//    "origin": optional str}
// Malformed lines and duplicate ids raise Error(parse) carrying the line
// number; an empty file raises "empty corpus".
Corpus ingest(const std::filesystem::path& path);

// Serialize in the same JSON-lines schema (used for augmented corpora).
std::string to_jsonl(const Corpus& corpus);

PopularityTable compute_popularity(const Corpus& corpus);

// Partition mentioned movies (pop >= 1) into head/body/tail:
//   tail: pop <= tail_max, body: tail_max < pop <= body_max, head: pop > body_max.
// Requires 1 <= tail_max < body_max.
Segmentation segment(const PopularityTable& pop, std::int64_t tail_max = 1,
                     std::int64_t body_max = 5);

// Alternative thresholding: tail boundary from the nearest-rank 25th
// percentile of pop values over mentioned movies (tail_max = theta - 1,
// clamped into [1, body_max - 1]).
Segmentation segment_by_quartile(const PopularityTable& pop, std::int64_t body_max = 5);

std::string segmentation_to_json_string(const Segmentation& seg, const PopularityTable& pop);

// D_m for every body/tail movie, as indices into corpus.dialogues. A dialogue
// mentioning k body/tail movies appears in k subsets.
std::map<std::string, std::vector<std::size_t>> build_subsets(const Corpus& corpus,
                                                              const Segmentation& seg);

StatsReport corpus_stats(const Corpus& corpus, const Segmentation& seg);

}  // namespace lumi
