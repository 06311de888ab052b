#include "lumi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "lumi/embed.hpp"
#include "lumi/util.hpp"

namespace lumi {

using nlohmann::json;

void validate_ranked_list(const RankedList& list) {
  std::set<std::string> seen;
  for (const std::string& item : list.ranking) {
    if (!seen.insert(item).second)
      fail(ErrorKind::invariant,
           "ranked list " + list.query_id + " contains duplicate item " + item);
  }
}

namespace {

std::size_t effective_k(const RankedList& list, int k) {
  return std::min<std::size_t>(static_cast<std::size_t>(k), list.ranking.size());
}

double mean_or_zero(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace

double recall_at_k(std::span<const RankedList> lists, int k, std::int64_t* skipped) {
  if (k < 1) fail(ErrorKind::config, "recall_at_k: k must be >= 1");
  std::vector<double> per_query;
  std::int64_t skip = 0;
  for (const RankedList& list : lists) {
    if (list.relevant.empty()) {
      ++skip;
      continue;
    }
    std::int64_t hits = 0;
    const std::size_t kk = effective_k(list, k);
    for (std::size_t i = 0; i < kk; ++i) hits += list.relevant.count(list.ranking[i]);
    per_query.push_back(static_cast<double>(hits) / static_cast<double>(list.relevant.size()));
  }
  if (skipped != nullptr) *skipped = skip;
  return mean_or_zero(per_query);
}

double ndcg_at_k(std::span<const RankedList> lists, int k, std::int64_t* skipped) {
  if (k < 1) fail(ErrorKind::config, "ndcg_at_k: k must be >= 1");
  std::vector<double> per_query;
  std::int64_t skip = 0;
  for (const RankedList& list : lists) {
    if (list.relevant.empty()) {
      ++skip;
      continue;
    }
    double dcg = 0.0;
    const std::size_t kk = effective_k(list, k);
    for (std::size_t i = 0; i < kk; ++i) {
      if (list.relevant.count(list.ranking[i]))
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    double ideal = 0.0;
    const std::size_t ideal_hits =
        std::min<std::size_t>(static_cast<std::size_t>(k), list.relevant.size());
    for (std::size_t i = 0; i < ideal_hits; ++i)
      ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    per_query.push_back(ideal > 0.0 ? dcg / ideal : 0.0);
  }
  if (skipped != nullptr) *skipped = skip;
  return mean_or_zero(per_query);
}

double mrr_at_k(std::span<const RankedList> lists, int k, std::int64_t* skipped) {
  if (k < 1) fail(ErrorKind::config, "mrr_at_k: k must be >= 1");
  std::vector<double> per_query;
  std::int64_t skip = 0;
  for (const RankedList& list : lists) {
    if (list.relevant.empty()) {
      ++skip;
      continue;
    }
    double rr = 0.0;
    const std::size_t kk = effective_k(list, k);
    for (std::size_t i = 0; i < kk; ++i) {
      if (list.relevant.count(list.ranking[i])) {
        rr = 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
    per_query.push_back(rr);
  }
  if (skipped != nullptr) *skipped = skip;
  return mean_or_zero(per_query);
}

std::optional<double> tail_recall_at_k(std::span<const RankedList> lists, int k,
                                       const std::set<std::string>& tail,
                                       std::int64_t* used) {
  if (k < 1) fail(ErrorKind::config, "tail_recall_at_k: k must be >= 1");
  std::vector<double> per_query;
  for (const RankedList& list : lists) {
    std::set<std::string> tail_relevant;
    for (const std::string& item : list.relevant) {
      if (tail.count(item)) tail_relevant.insert(item);
    }
    if (tail_relevant.empty()) continue;
    std::int64_t hits = 0;
    const std::size_t kk = effective_k(list, k);
    for (std::size_t i = 0; i < kk; ++i) hits += tail_relevant.count(list.ranking[i]);
    per_query.push_back(static_cast<double>(hits) /
                        static_cast<double>(tail_relevant.size()));
  }
  if (used != nullptr) *used = static_cast<std::int64_t>(per_query.size());
  if (per_query.empty()) return std::nullopt;
  return mean_or_zero(per_query);
}

double coverage_at_k(std::span<const RankedList> lists, int k, std::int64_t catalog_size) {
  if (k < 1) fail(ErrorKind::config, "coverage_at_k: k must be >= 1");
  if (catalog_size <= 0) fail(ErrorKind::config, "coverage_at_k: catalog_size must be > 0");
  std::set<std::string> covered;
  for (const RankedList& list : lists) {
    const std::size_t kk = effective_k(list, k);
    for (std::size_t i = 0; i < kk; ++i) covered.insert(list.ranking[i]);
  }
  return static_cast<double>(covered.size()) / static_cast<double>(catalog_size);
}

std::optional<double> ild_at_k(std::span<const RankedList> lists, int k,
                               const std::map<std::string, std::vector<double>>& item_vectors) {
  if (k < 2) return std::nullopt;
  std::vector<double> per_query;
  for (const RankedList& list : lists) {
    const std::size_t kk = effective_k(list, k);
    if (kk < 2) continue;
    std::vector<const std::vector<double>*> vecs;
    vecs.reserve(kk);
    for (std::size_t i = 0; i < kk; ++i) {
      auto it = item_vectors.find(list.ranking[i]);
      if (it == item_vectors.end())
        fail(ErrorKind::not_found, "ild_at_k: no vector for item " + list.ranking[i]);
      vecs.push_back(&it->second);
    }
    std::vector<double> dists;
    dists.reserve(kk * (kk - 1) / 2);
    for (std::size_t i = 0; i < kk; ++i) {
      for (std::size_t j = i + 1; j < kk; ++j) {
        dists.push_back((1.0 - cosine(std::span<const double>(*vecs[i]),
                                      std::span<const double>(*vecs[j]))) /
                        2.0);
      }
    }
    per_query.push_back(std::clamp(pairwise_sum(dists) / static_cast<double>(dists.size()),
                                   0.0, 1.0));
  }
  if (per_query.empty()) return std::nullopt;
  return mean_or_zero(per_query);
}

double pwp(std::span<const RankedList> lists, int k, const std::map<std::string, double>& pop) {
  if (k < 1) fail(ErrorKind::config, "pwp: k must be >= 1");
  const auto weight = [&pop](const std::string& item) {
    auto it = pop.find(item);
    if (it == pop.end()) fail(ErrorKind::not_found, "pwp: no popularity for item " + item);
    if (it->second < 0.0) fail(ErrorKind::invariant, "pwp: negative popularity");
    return 1.0 / std::log2(2.0 + it->second);
  };
  std::vector<double> per_query;
  for (const RankedList& list : lists) {
    const std::size_t kk = effective_k(list, k);
    if (kk == 0) continue;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < kk; ++i) {
      const double w = weight(list.ranking[i]);
      den += w;
      if (list.relevant.count(list.ranking[i])) num += w;
    }
    per_query.push_back(den > 0.0 ? num / den : 0.0);
  }
  return mean_or_zero(per_query);
}

double distinct_n(std::span<const std::string> texts, int n) {
  if (n < 1) fail(ErrorKind::config, "distinct_n: n must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::int64_t total = 0;
  for (const std::string& text : texts) {
    const std::vector<std::string> tokens = whitespace_tokens(text);
    if (tokens.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      unique.insert(std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n));
      ++total;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

namespace {

std::map<std::vector<std::string>, std::int64_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, std::int64_t> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
  return counts;
}

}  // namespace

double bleu_n(std::span<const BleuSegment> segments, int n) {
  if (n < 1 || n > 9) fail(ErrorKind::config, "bleu_n: order out of range");
  std::vector<std::int64_t> matches(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> totals(static_cast<std::size_t>(n), 0);
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;

  for (const BleuSegment& seg : segments) {
    const std::vector<std::string> hyp = whitespace_tokens(seg.hypothesis);
    if (seg.references.empty()) fail(ErrorKind::config, "bleu_n: segment without references");
    std::vector<std::vector<std::string>> refs;
    refs.reserve(seg.references.size());
    for (const std::string& r : seg.references) refs.push_back(whitespace_tokens(r));

    hyp_len += static_cast<std::int64_t>(hyp.size());
    // Closest reference length; ties prefer the shorter reference.
    std::int64_t closest = static_cast<std::int64_t>(refs[0].size());
    for (const auto& r : refs) {
      const auto len = static_cast<std::int64_t>(r.size());
      const auto d_new = std::abs(len - static_cast<std::int64_t>(hyp.size()));
      const auto d_old = std::abs(closest - static_cast<std::int64_t>(hyp.size()));
      if (d_new < d_old || (d_new == d_old && len < closest)) closest = len;
    }
    ref_len += closest;

    for (int m = 1; m <= n; ++m) {
      const auto hyp_counts = ngram_counts(hyp, m);
      std::map<std::vector<std::string>, std::int64_t> max_ref;
      for (const auto& r : refs) {
        for (const auto& [gram, count] : ngram_counts(r, m))
          max_ref[gram] = std::max(max_ref[gram], count);
      }
      for (const auto& [gram, count] : hyp_counts) {
        totals[m - 1] += count;
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) matches[m - 1] += std::min(count, it->second);
      }
    }
  }

  if (hyp_len == 0 || totals[0] == 0) return 0.0;
  if (matches[0] == 0) return 0.0;

  double log_precision = 0.0;
  for (int m = 1; m <= n; ++m) {
    double match = static_cast<double>(matches[m - 1]);
    double total = static_cast<double>(totals[m - 1]);
    if (m > 1) {  // add-one smoothing keeps short dialogue responses nondegenerate
      match += 1.0;
      total += 1.0;
    }
    log_precision += std::log(match / total) / static_cast<double>(n);
  }
  const double bp =
      hyp_len > ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_precision);
}

double bleu_n(const std::string& hypothesis, const std::vector<std::string>& references, int n) {
  const BleuSegment seg{hypothesis, references};
  return bleu_n(std::span<const BleuSegment>(&seg, 1), n);
}

double rouge_l(const std::string& hypothesis, const std::string& reference) {
  const std::vector<std::string> hyp = whitespace_tokens(hypothesis);
  const std::vector<std::string> ref = whitespace_tokens(reference);
  if (hyp.empty() || ref.empty()) return 0.0;

  std::vector<std::vector<std::int64_t>> lcs(hyp.size() + 1,
                                             std::vector<std::int64_t>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      lcs[i][j] = hyp[i - 1] == ref[j - 1] ? lcs[i - 1][j - 1] + 1
                                           : std::max(lcs[i - 1][j], lcs[i][j - 1]);
    }
  }
  const double l = static_cast<double>(lcs[hyp.size()][ref.size()]);
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(hyp.size());
  const double r = l / static_cast<double>(ref.size());
  const double beta2 = 1.2 * 1.2;
  const double denom = r + beta2 * p;
  return denom > 0.0 ? (1.0 + beta2) * p * r / denom : 0.0;
}

std::map<std::string, std::vector<double>> item_comention_vectors(const Corpus& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.catalog.size());
  for (const auto& [id, title] : corpus.catalog) ids.push_back(id);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;

  std::map<std::string, std::vector<double>> vectors;
  for (const std::string& id : ids) vectors[id] = std::vector<double>(ids.size(), 0.0);
  for (const Dialogue& d : corpus.dialogues) {
    for (const std::string& a : d.mentions) {
      auto va = vectors.find(a);
      if (va == vectors.end()) continue;
      for (const std::string& b : d.mentions) va->second[pos.at(b)] += 1.0;
    }
  }
  for (auto& [id, vec] : vectors) {
    double sq = 0.0;
    for (double v : vec) sq += v * v;
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (double& v : vec) v *= inv;
    }
  }
  return vectors;
}

MetricReport evaluate_rankings(std::span<const RankedList> lists,
                               const std::vector<int>& k_values,
                               const std::set<std::string>& tail, std::int64_t catalog_size,
                               const std::map<std::string, double>& pop,
                               const std::map<std::string, std::vector<double>>& item_vectors) {
  for (const RankedList& list : lists) validate_ranked_list(list);
  MetricReport report;
  report.k_values = k_values;
  report.catalog_size = catalog_size;
  report.queries = static_cast<std::int64_t>(lists.size());

  for (int k : k_values) {
    const std::string suffix = "@" + std::to_string(k);
    report.values["recall" + suffix] = recall_at_k(lists, k, &report.skipped_empty_relevant);
    report.values["ndcg" + suffix] = ndcg_at_k(lists, k);
    report.values["mrr" + suffix] = mrr_at_k(lists, k);
    if (auto tr = tail_recall_at_k(lists, k, tail, &report.tail_queries)) {
      report.values["tail_recall" + suffix] = *tr;
    } else {
      report.absent.push_back("tail_recall" + suffix);
    }
    report.values["coverage" + suffix] = coverage_at_k(lists, k, catalog_size);
    if (auto ild = ild_at_k(lists, k, item_vectors)) {
      report.values["ild" + suffix] = *ild;
    } else {
      report.absent.push_back("ild" + suffix);
    }
  }
  if (!k_values.empty()) {
    const int k_max = *std::max_element(k_values.begin(), k_values.end());
    report.values["pwp@" + std::to_string(k_max)] = pwp(lists, k_max, pop);
  }
  return report;
}

std::string MetricReport::to_json_string() const {
  json doc;
  doc["values"] = values;
  doc["absent"] = absent;
  doc["k_values"] = k_values;
  doc["catalog_size"] = catalog_size;
  doc["queries"] = queries;
  doc["skipped_empty_relevant"] = skipped_empty_relevant;
  doc["tail_queries"] = tail_queries;
  return doc.dump(2);
}

std::string MetricReport::to_markdown() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  auto row_for = [this, &out](const std::string& name, const char* label) {
    out << "| " << label << " |";
    for (int k : k_values) {
      auto it = values.find(name + "@" + std::to_string(k));
      if (it == values.end()) {
        out << " - |";
      } else {
        out << " " << it->second << " |";
      }
    }
    out << "\n";
  };
  out << "| Metric |";
  for (int k : k_values) out << " @" << k << " |";
  out << "\n|--------|";
  for (std::size_t i = 0; i < k_values.size(); ++i) out << "----|";
  out << "\n";
  row_for("recall", "Recall");
  row_for("ndcg", "NDCG");
  row_for("mrr", "MRR");
  row_for("tail_recall", "Tail-Recall");
  row_for("coverage", "Coverage");
  row_for("ild", "ILD");
  if (!k_values.empty()) {
    const int k_max = *std::max_element(k_values.begin(), k_values.end());
    auto it = values.find("pwp@" + std::to_string(k_max));
    if (it != values.end()) out << "\nPWP@" << k_max << ": " << it->second << "\n";
  }
  out << "\nQueries: " << queries << " (skipped with empty ground truth: "
      << skipped_empty_relevant << ", tail queries: " << tail_queries
      << "); catalog size: " << catalog_size << "\n";
  return out.str();
}

}  // namespace lumi
