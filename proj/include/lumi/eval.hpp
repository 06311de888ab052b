#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lumi/corpus.hpp"

namespace lumi {

struct RankedList {
  std::string query_id;
  std::vector<std::string> ranking;  // no duplicates
  std::set<std::string> relevant;
};

void validate_ranked_list(const RankedList& list);

// Queries with an empty relevant set are skipped; `skipped` reports how many.
double recall_at_k(std::span<const RankedList> lists, int k, std::int64_t* skipped = nullptr);

// Binary relevance, gain 1/log2(1 + rank), normalized by the ideal DCG.
double ndcg_at_k(std::span<const RankedList> lists, int k, std::int64_t* skipped = nullptr);

double mrr_at_k(std::span<const RankedList> lists, int k, std::int64_t* skipped = nullptr);

// Recall over tail ground truth only: queries restricted to those whose
// relevant set intersects `tail`, relevants restricted to tail items.
// No tail queries -> nullopt (absent, not 0).
std::optional<double> tail_recall_at_k(std::span<const RankedList> lists, int k,
                                       const std::set<std::string>& tail,
                                       std::int64_t* used = nullptr);

double coverage_at_k(std::span<const RankedList> lists, int k, std::int64_t catalog_size);

// Mean pairwise distance (1 - cosine)/2 within each top-k list; lists with
// fewer than two items are skipped, k < 2 -> absent.
std::optional<double> ild_at_k(std::span<const RankedList> lists, int k,
                               const std::map<std::string, std::vector<double>>& item_vectors);

// Popularity-weighted precision with w(i) = 1 / log2(2 + pop(i)).
double pwp(std::span<const RankedList> lists, int k,
           const std::map<std::string, double>& pop);

// |unique n-grams| / |total n-grams| across the whole text collection;
// whitespace tokenization, case-folded.
double distinct_n(std::span<const std::string> texts, int n);

struct BleuSegment {
  std::string hypothesis;
  std::vector<std::string> references;
};

// Corpus BLEU, uniform weights over orders 1..n, clipped counts, brevity
// penalty against closest reference length, add-one smoothing on orders > 1.
double bleu_n(std::span<const BleuSegment> segments, int n);
double bleu_n(const std::string& hypothesis, const std::vector<std::string>& references, int n);

// Token-level LCS F-measure: F = (1 + b^2) P R / (R + b^2 P), b = 1.2.
double rouge_l(const std::string& hypothesis, const std::string& reference);

// Default ILD item vectors: L2-normalized co-mention counts from the corpus
// (diagonal carries the movie's own popularity so every mentioned item has a
// nonzero vector).
std::map<std::string, std::vector<double>> item_comention_vectors(const Corpus& corpus);

struct MetricReport {
  std::map<std::string, double> values;
  std::vector<std::string> absent;  // metrics undefined on this input
  std::vector<int> k_values;
  std::int64_t catalog_size = 0;
  std::int64_t queries = 0;
  std::int64_t skipped_empty_relevant = 0;
  std::int64_t tail_queries = 0;

  std::string to_json_string() const;
  std::string to_markdown() const;
};

// Full §-style report: Recall/NDCG/MRR/Tail-Recall at every k in k_values,
// Coverage/ILD at every k, and PWP at the largest k.
MetricReport evaluate_rankings(std::span<const RankedList> lists,
                               const std::vector<int>& k_values,
                               const std::set<std::string>& tail, std::int64_t catalog_size,
                               const std::map<std::string, double>& pop,
                               const std::map<std::string, std::vector<double>>& item_vectors);

}  // namespace lumi
