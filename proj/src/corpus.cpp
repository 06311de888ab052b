#include "lumi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lumi/util.hpp"

namespace lumi {

using nlohmann::json;

const char* origin_name(Origin origin) {
  switch (origin) {
    case Origin::original: return "original";
    case Origin::augmented_tail: return "augmented_tail";
    case Origin::augmented_body: return "augmented_body";
  }
  return "original";
}

Origin origin_from_name(const std::string& name) {
  if (name == "original") return Origin::original;
  if (name == "augmented_tail") return Origin::augmented_tail;
  if (name == "augmented_body") return Origin::augmented_body;
  fail(ErrorKind::parse, "unknown origin value: " + name);
}

std::string Dialogue::joined_text() const {
  std::string out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += utterances[i].text;
  }
  return out;
}

const Dialogue* Corpus::find_dialogue(const std::string& id) const {
  for (const Dialogue& d : dialogues) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

std::int64_t PopularityTable::of(const std::string& movie_id) const {
  auto it = pop.find(movie_id);
  return it == pop.end() ? 0 : it->second;
}

// ReDial texts reference movies inline as "@<digits>". Any such token whose
// id is missing from the line's movieMentions map is reported, not dropped.
std::vector<std::string> inline_movie_refs(const std::string& text) {
  std::vector<std::string> refs;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '@') continue;
    std::size_t j = i + 1;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i + 1) refs.push_back(text.substr(i + 1, j - i - 1));
    i = j - 1;
  }
  return refs;
}

namespace {

Dialogue parse_dialogue_line(const json& doc, std::size_t line_number,
                             std::map<std::string, std::string>& catalog,
                             std::vector<IngestWarning>& warnings) {
  const auto line_err = [line_number](const std::string& what) -> std::string {
    return "line " + std::to_string(line_number) + ": " + what;
  };
  if (!doc.is_object()) fail(ErrorKind::parse, line_err("expected a JSON object"));
  if (!doc.contains("conversationId") || !doc["conversationId"].is_string())
    fail(ErrorKind::parse, line_err("missing string field conversationId"));
  if (!doc.contains("messages") || !doc["messages"].is_array())
    fail(ErrorKind::parse, line_err("missing array field messages"));

  Dialogue d;
  d.id = doc["conversationId"].get<std::string>();
  if (doc.contains("origin")) {
    if (!doc["origin"].is_string()) fail(ErrorKind::parse, line_err("origin must be a string"));
    try {
      d.origin = origin_from_name(doc["origin"].get<std::string>());
    } catch (const Error& e) {
      fail(ErrorKind::parse, line_err(e.what()));
    }
  }

  int turn = 0;
  for (const json& msg : doc["messages"]) {
    if (!msg.is_object() || !msg.contains("text") || !msg["text"].is_string())
      fail(ErrorKind::parse, line_err("message without string text"));
    Utterance u;
    u.text = msg["text"].get<std::string>();
    u.speaker_id = msg.value("senderWorkerId", std::string{});
    if (trim(u.text).empty()) {
      warnings.push_back({line_number, d.id, "dropped utterance with empty text"});
      continue;
    }
    u.turn_index = turn++;
    d.utterances.push_back(std::move(u));
  }
  if (d.utterances.empty())
    fail(ErrorKind::parse, line_err("dialogue " + d.id + " has no non-empty utterances"));

  if (doc.contains("movieMentions")) {
    if (!doc["movieMentions"].is_object())
      fail(ErrorKind::parse, line_err("movieMentions must be an object"));
    for (const auto& [movie_id, title] : doc["movieMentions"].items()) {
      d.mentions.insert(movie_id);
      std::string title_str = title.is_string() ? title.get<std::string>() : std::string{};
      auto [it, inserted] = catalog.emplace(movie_id, title_str);
      if (!inserted && it->second.empty() && !title_str.empty()) it->second = title_str;
    }
  }

  for (const Utterance& u : d.utterances) {
    for (const std::string& ref : inline_movie_refs(u.text)) {
      if (d.mentions.count(ref) == 0)
        warnings.push_back({line_number, d.id,
                            "movie reference @" + ref + " in text but not in movieMentions"});
    }
  }
  return d;
}

}  // namespace

Corpus ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open corpus file: " + path.string());

  Corpus corpus;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::parse,
           "line " + std::to_string(line_number) + ": invalid JSON: " + e.what());
    }
    Dialogue d = parse_dialogue_line(doc, line_number, corpus.catalog, corpus.warnings);
    if (!seen_ids.insert(d.id).second)
      fail(ErrorKind::parse,
           "line " + std::to_string(line_number) + ": duplicate dialogue_id " + d.id);
    corpus.dialogues.push_back(std::move(d));
  }
  if (corpus.dialogues.empty()) fail(ErrorKind::parse, "empty corpus: " + path.string());
  return corpus;
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const Dialogue& d : corpus.dialogues) {
    json doc;
    doc["conversationId"] = d.id;
    json msgs = json::array();
    for (const Utterance& u : d.utterances) {
      msgs.push_back({{"senderWorkerId", u.speaker_id}, {"text", u.text}});
    }
    doc["messages"] = msgs;
    json mentions = json::object();
    for (const std::string& m : d.mentions) {
      auto it = corpus.catalog.find(m);
      mentions[m] = it == corpus.catalog.end() ? "" : it->second;
    }
    doc["movieMentions"] = mentions;
    doc["origin"] = origin_name(d.origin);
    out += doc.dump();
    out.push_back('\n');
  }
  return out;
}

PopularityTable compute_popularity(const Corpus& corpus) {
  PopularityTable table;
  for (const auto& [movie_id, title] : corpus.catalog) table.pop[movie_id] = 0;
  for (const Dialogue& d : corpus.dialogues) {
    for (const std::string& m : d.mentions) table.pop[m] += 1;
  }
  return table;
}

Segmentation segment(const PopularityTable& pop, std::int64_t tail_max, std::int64_t body_max) {
  if (tail_max < 1) fail(ErrorKind::config, "segment: tail_max must be >= 1");
  if (tail_max >= body_max)
    fail(ErrorKind::config, "segment: tail_max (" + std::to_string(tail_max) +
                                ") must be < body_max (" + std::to_string(body_max) + ")");
  Segmentation seg;
  seg.tail_max = tail_max;
  seg.body_max = body_max;
  for (const auto& [movie_id, count] : pop.pop) {
    if (count < 1) continue;  // unmentioned movies stay in the catalog only
    if (count <= tail_max) {
      seg.tail.insert(movie_id);
    } else if (count <= body_max) {
      seg.body.insert(movie_id);
    } else {
      seg.head.insert(movie_id);
    }
  }
  return seg;
}

Segmentation segment_by_quartile(const PopularityTable& pop, std::int64_t body_max) {
  std::vector<std::int64_t> values;
  for (const auto& [movie_id, count] : pop.pop) {
    if (count >= 1) values.push_back(count);
  }
  if (values.empty()) fail(ErrorKind::invariant, "segment_by_quartile: no mentioned movies");
  std::sort(values.begin(), values.end());
  const std::size_t rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(values.size()) - 1e-9)));
  const std::int64_t theta = values[rank - 1];
  const std::int64_t tail_max = std::clamp<std::int64_t>(theta - 1, 1, body_max - 1);
  return segment(pop, tail_max, body_max);
}

std::string segmentation_to_json_string(const Segmentation& seg, const PopularityTable& pop) {
  json doc;
  doc["thresholds"] = {{"tail_max", seg.tail_max}, {"body_max", seg.body_max}};
  auto group = [&pop](const std::set<std::string>& ids) {
    json arr = json::array();
    for (const std::string& id : ids) arr.push_back({{"movie_id", id}, {"pop", pop.of(id)}});
    return arr;
  };
  doc["head"] = group(seg.head);
  doc["body"] = group(seg.body);
  doc["tail"] = group(seg.tail);
  doc["counts"] = {{"head", seg.head.size()}, {"body", seg.body.size()}, {"tail", seg.tail.size()}};
  return doc.dump(2);
}

std::map<std::string, std::vector<std::size_t>> build_subsets(const Corpus& corpus,
                                                              const Segmentation& seg) {
  std::map<std::string, std::vector<std::size_t>> subsets;
  for (const std::string& m : seg.body) subsets[m] = {};
  for (const std::string& m : seg.tail) subsets[m] = {};
  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
    for (const std::string& m : corpus.dialogues[i].mentions) {
      auto it = subsets.find(m);
      if (it != subsets.end()) it->second.push_back(i);
    }
  }
  return subsets;
}

StatsReport corpus_stats(const Corpus& corpus, const Segmentation& seg) {
  const PopularityTable pop = compute_popularity(corpus);
  StatsReport report;
  report.catalog_size = static_cast<std::int64_t>(corpus.catalog.size());
  report.dialogues = static_cast<std::int64_t>(corpus.dialogues.size());

  auto fill = [&pop](GroupStats& g, const std::set<std::string>& ids) {
    g.titles = static_cast<std::int64_t>(ids.size());
    g.mentions = 0;
    for (const std::string& id : ids) g.mentions += pop.of(id);
  };
  fill(report.head, seg.head);
  fill(report.body, seg.body);
  fill(report.tail, seg.tail);
  report.total_titles = report.head.titles + report.body.titles + report.tail.titles;
  report.total_mentions = report.head.mentions + report.body.mentions + report.tail.mentions;

  auto share = [](std::int64_t part, std::int64_t whole) {
    return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
  };
  for (GroupStats* g : {&report.head, &report.body, &report.tail}) {
    g->title_share = share(g->titles, report.total_titles);
    g->mention_share = share(g->mentions, report.total_mentions);
  }
  return report;
}

std::string StatsReport::to_json_string() const {
  auto group = [](const GroupStats& g) {
    return json{{"titles", g.titles},
                {"mentions", g.mentions},
                {"title_share", g.title_share},
                {"mention_share", g.mention_share}};
  };
  json doc;
  doc["head"] = group(head);
  doc["body"] = group(body);
  doc["tail"] = group(tail);
  doc["total_titles"] = total_titles;
  doc["total_mentions"] = total_mentions;
  doc["catalog_size"] = catalog_size;
  doc["dialogues"] = dialogues;
  return doc.dump(2);
}

std::string StatsReport::to_markdown() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(1);
  out << "| Group | Titles | Title share | Mentions | Mention share |\n";
  out << "|-------|--------|-------------|----------|---------------|\n";
  auto row = [&out](const char* name, const GroupStats& g) {
    out << "| " << name << " | " << g.titles << " | " << 100.0 * g.title_share << "% | "
        << g.mentions << " | " << 100.0 * g.mention_share << "% |\n";
  };
  row("Head", head);
  row("Body", body);
  row("Tail", tail);
  out << "\nMentioned titles: " << total_titles << " of " << catalog_size
      << " catalog entries; mention-bearing dialogue incidences: " << total_mentions
      << "; dialogues: " << dialogues << "\n";
  return out.str();
}

}  // namespace lumi
