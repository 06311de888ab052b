#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lumi/corpus.hpp"
#include "lumi/eval.hpp"
#include "lumi/losses.hpp"

namespace lumi {

struct SyntheticSpec {
  int n_items = 500;
  int n_dialogues = 5000;
  double zipf_exponent = 1.2;
  int vocab_size = 400;
  std::uint64_t seed = 17;

  void validate() const;
};

struct SyntheticData {
  Corpus corpus;
  std::vector<std::string> item_ids;    // rank order, index is the class id
  std::vector<std::int64_t> labels;     // ground-truth next item per dialogue
  std::vector<int> genres;              // per item
};

// Deterministic long-tail corpus: ~70% of items carry exactly one mention,
// the rest follow a Zipf(zipf_exponent) profile; every dialogue carries one
// primary mention (sometimes a same-genre co-mention) and a next-item label
// drawn from its genre's popularity profile.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

enum class LossKind { ce, focal, acfl };
const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// Sparse features: bag of mentioned item ids plus hashed text tokens
// (text block L2-normalized).
using SparseFeatures = std::vector<std::pair<std::size_t, double>>;

std::vector<SparseFeatures> extract_features(const Corpus& corpus,
                                             const std::map<std::string, std::size_t>& item_index,
                                             std::size_t text_dim);

class LinearRecommender {
 public:
  LinearRecommender(std::size_t n_items, std::size_t feature_dim);

  std::vector<double> scores(const SparseFeatures& features) const;
  static std::vector<double> softmax(const std::vector<double>& scores);

  std::size_t n_items() const { return n_items_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // Row-major weights [item][feature]; exposed for the training loop.
  std::vector<double>& weights() { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  std::size_t n_items_;
  std::size_t feature_dim_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

struct TrainOptions {
  int epochs = 60;
  double lr = 2.0;
  double val_fraction = 0.2;
  std::size_t text_dim = 256;
  bool resample = false;  // draw examples ~ w_sample instead of multiplying
  std::uint64_t seed = 17;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  LinearRecommender model;
  std::vector<EpochRecord> curve;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

// Full-batch gradient descent with a fixed learning rate. ACFL is applied
// one-vs-rest on the positive: p = softmax probability of the true item,
// y = 1, class id = item id, pop(x) = training-split popularity of the
// labeled item. Divergence (non-finite loss) aborts with a diagnostic.
TrainResult train(const SyntheticData& data, LossKind kind, const AcflConfig& cfg,
                  const TrainOptions& options);

std::string curve_to_csv(const std::vector<EpochRecord>& curve);

// Top-k rankings over the validation split (relevant = the labeled item).
std::vector<RankedList> rank_validation(const LinearRecommender& model,
                                        const SyntheticData& data,
                                        const std::vector<SparseFeatures>& features,
                                        const std::vector<std::size_t>& val_indices, int k);

struct SeedRow {
  LossKind kind = LossKind::ce;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

struct ComparisonReport {
  std::vector<SeedRow> rows;
  std::map<std::string, std::map<std::string, double>> medians;  // loss -> metric -> median
  std::map<std::string, std::string> win_counts;                 // description -> "x/n"
  std::vector<int> k_values;
  std::map<std::string, std::vector<EpochRecord>> curves;  // "<loss>_<seed>" -> curve

  std::string to_json_string() const;
  std::string to_markdown() const;
};

struct ExperimentOptions {
  SyntheticSpec spec;
  std::vector<LossKind> kinds = {LossKind::ce, LossKind::focal, LossKind::acfl};
  int n_seeds = 5;
  std::vector<int> k_values = {1, 10, 50};
  AcflConfig acfl;
  TrainOptions train;
};

// Per (loss kind x seed): Recall/Tail-Recall/Coverage/ILD at each k and PWP
// on the held-out split; plus per-kind medians and ACFL-vs-CE win counts.
ComparisonReport experiment(const ExperimentOptions& options);

}  // namespace lumi
