#include "lumi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "lumi/util.hpp"

namespace lumi {

using nlohmann::json;

void SyntheticSpec::validate() const {
  if (n_items < 10) fail(ErrorKind::config, "SyntheticSpec: n_items must be >= 10");
  if (n_dialogues < 1) fail(ErrorKind::config, "SyntheticSpec: n_dialogues must be >= 1");
  if (!(zipf_exponent > 0.0)) fail(ErrorKind::config, "SyntheticSpec: zipf_exponent must be > 0");
  if (vocab_size < 50) fail(ErrorKind::config, "SyntheticSpec: vocab_size must be >= 50");
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::focal: return "focal";
    case LossKind::acfl: return "acfl";
  }
  return "ce";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "ce") return LossKind::ce;
  if (name == "focal") return LossKind::focal;
  if (name == "acfl") return LossKind::acfl;
  fail(ErrorKind::config, "unknown loss kind: " + name);
}

namespace {

// Target mention profile: ~70% of items single-mention, the rest Zipf with
// the requested exponent (floor 2 so they stay out of the tail band).
std::vector<std::int64_t> mention_profile(int n_items, int n_dialogues, double s) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_items), 0);
  if (n_dialogues <= n_items) {
    for (int i = 0; i < n_dialogues; ++i) counts[static_cast<std::size_t>(i)] = 1;
    return counts;
  }
  int n_top = std::min<int>(static_cast<int>(std::lround(0.3 * n_items)),
                            n_dialogues - n_items);
  n_top = std::max(n_top, 0);
  const int n_tail = n_items - n_top;
  const std::int64_t top_budget = n_dialogues - n_tail;
  for (int i = n_top; i < n_items; ++i) counts[static_cast<std::size_t>(i)] = 1;
  if (n_top == 0) return counts;

  const auto total_for = [&](double c) {
    std::int64_t total = 0;
    for (int i = 0; i < n_top; ++i) {
      const double raw = c * std::pow(static_cast<double>(i + 1), -s);
      total += std::max<std::int64_t>(2, std::llround(raw));
    }
    return total;
  };
  double lo = 0.0, hi = 2.0 * static_cast<double>(top_budget);
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (total_for(mid) >= top_budget) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  for (int i = 0; i < n_top; ++i) {
    const double raw = hi * std::pow(static_cast<double>(i + 1), -s);
    counts[static_cast<std::size_t>(i)] = std::max<std::int64_t>(2, std::llround(raw));
  }
  // Settle the rounding remainder on the most popular ranks.
  std::int64_t diff = std::accumulate(counts.begin(), counts.begin() + n_top,
                                      std::int64_t{0}) - top_budget;
  for (int i = 0; diff != 0 && i < n_top; i = (i + 1) % n_top) {
    if (diff > 0 && counts[static_cast<std::size_t>(i)] > 2) {
      --counts[static_cast<std::size_t>(i)];
      --diff;
    } else if (diff < 0) {
      ++counts[static_cast<std::size_t>(i)];
      ++diff;
    }
  }
  return counts;
}

std::int64_t weighted_pick(const std::vector<std::int64_t>& weights, Rng& rng) {
  std::int64_t total = 0;
  for (std::int64_t w : weights) total += w;
  std::int64_t ticket = rng.range(0, total - 1);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    ticket -= weights[i];
    if (ticket < 0) return static_cast<std::int64_t>(i);
  }
  return static_cast<std::int64_t>(weights.size()) - 1;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;

  const int n_genres = std::min(20, std::max(2, spec.n_items / 5));
  const int per_genre_words = std::max(3, (spec.vocab_size * 3 / 4) / n_genres);
  const int noise_words = std::max(5, spec.vocab_size - per_genre_words * n_genres);

  data.item_ids.reserve(static_cast<std::size_t>(spec.n_items));
  data.genres.reserve(static_cast<std::size_t>(spec.n_items));
  for (int r = 0; r < spec.n_items; ++r) {
    data.item_ids.push_back(std::to_string(100000 + r));
    data.genres.push_back(r % n_genres);
  }
  for (int r = 0; r < spec.n_items; ++r)
    data.corpus.catalog[data.item_ids[static_cast<std::size_t>(r)]] =
        "Synthetic Movie " + std::to_string(r);

  const std::vector<std::int64_t> counts =
      mention_profile(spec.n_items, spec.n_dialogues, spec.zipf_exponent);

  // Per-genre item lists and popularity weights, for labels and co-mentions.
  std::vector<std::vector<std::int64_t>> genre_items(static_cast<std::size_t>(n_genres));
  for (int r = 0; r < spec.n_items; ++r) {
    if (counts[static_cast<std::size_t>(r)] > 0)
      genre_items[static_cast<std::size_t>(r % n_genres)].push_back(r);
  }

  std::vector<std::int64_t> primary;
  primary.reserve(static_cast<std::size_t>(spec.n_dialogues));
  for (int r = 0; r < spec.n_items; ++r) {
    for (std::int64_t c = 0; c < counts[static_cast<std::size_t>(r)]; ++c)
      primary.push_back(r);
  }
  Rng shuffle_rng = Rng::derive(spec.seed, "synthetic:shuffle");
  for (std::size_t i = primary.size(); i > 1; --i)
    std::swap(primary[i - 1], primary[shuffle_rng.below(i)]);

  Rng text_rng = Rng::derive(spec.seed, "synthetic:text");
  Rng label_rng = Rng::derive(spec.seed, "synthetic:label");

  const auto genre_word = [&](int genre, std::uint64_t j) {
    return "w" + std::to_string(static_cast<std::uint64_t>(genre) * per_genre_words + j);
  };
  const auto noise_word = [&](std::uint64_t j) {
    return "w" + std::to_string(static_cast<std::uint64_t>(n_genres) * per_genre_words + j);
  };

  for (std::size_t i = 0; i < primary.size(); ++i) {
    const std::int64_t item = primary[i];
    const int genre = data.genres[static_cast<std::size_t>(item)];
    Dialogue d;
    d.id = "syn" + std::to_string(i);
    d.mentions.insert(data.item_ids[static_cast<std::size_t>(item)]);

    // Optional same-genre co-mention, never of a tail item so the tail
    // popularity band stays exactly single-mention.
    if (text_rng.below(2) == 0) {
      std::vector<std::int64_t> frequent;
      std::vector<std::int64_t> frequent_weights;
      for (std::int64_t other : genre_items[static_cast<std::size_t>(genre)]) {
        if (other != item && counts[static_cast<std::size_t>(other)] >= 2) {
          frequent.push_back(other);
          frequent_weights.push_back(counts[static_cast<std::size_t>(other)]);
        }
      }
      if (!frequent.empty()) {
        const std::int64_t co = frequent[static_cast<std::size_t>(
            weighted_pick(frequent_weights, text_rng))];
        d.mentions.insert(data.item_ids[static_cast<std::size_t>(co)]);
      }
    }

    for (int turn = 0; turn < 2; ++turn) {
      Utterance u;
      u.speaker_id = turn % 2 == 0 ? "seeker" : "recommender";
      u.turn_index = turn;
      std::ostringstream text;
      const std::int64_t words = text_rng.range(5, 8);
      for (std::int64_t w = 0; w < words; ++w) {
        if (w > 0) text << ' ';
        if (text_rng.below(10) < 7) {
          text << genre_word(genre, text_rng.below(static_cast<std::uint64_t>(per_genre_words)));
        } else {
          text << noise_word(text_rng.below(static_cast<std::uint64_t>(noise_words)));
        }
      }
      if (turn == 0) {
        for (const std::string& m : d.mentions) text << " @" << m;
      }
      u.text = text.str();
      d.utterances.push_back(std::move(u));
    }

    // Label: same-genre item drawn from the genre's popularity profile,
    // excluding the context item when the genre has alternatives.
    const auto& pool = genre_items[static_cast<std::size_t>(genre)];
    std::vector<std::int64_t> label_pool;
    std::vector<std::int64_t> label_weights;
    for (std::int64_t other : pool) {
      if (other == item && pool.size() > 1) continue;
      label_pool.push_back(other);
      label_weights.push_back(counts[static_cast<std::size_t>(other)]);
    }
    data.labels.push_back(
        label_pool[static_cast<std::size_t>(weighted_pick(label_weights, label_rng))]);
    data.corpus.dialogues.push_back(std::move(d));
  }
  return data;
}

std::vector<SparseFeatures> extract_features(const Corpus& corpus,
                                             const std::map<std::string, std::size_t>& item_index,
                                             std::size_t text_dim) {
  std::vector<SparseFeatures> all;
  all.reserve(corpus.dialogues.size());
  const std::size_t n_items = item_index.size();
  for (const Dialogue& d : corpus.dialogues) {
    SparseFeatures features;
    for (const std::string& m : d.mentions) {
      auto it = item_index.find(m);
      if (it != item_index.end()) features.emplace_back(it->second, 1.0);
    }
    std::map<std::size_t, double> text;
    for (const std::string& token : tokenize(d.joined_text())) {
      if (!token.empty() && token[0] == '@') continue;
      text[n_items + fnv1a64(token) % text_dim] += 1.0;
    }
    double sq = 0.0;
    for (const auto& [idx, v] : text) sq += v * v;
    const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
    for (const auto& [idx, v] : text) features.emplace_back(idx, v * inv);
    all.push_back(std::move(features));
  }
  return all;
}

LinearRecommender::LinearRecommender(std::size_t n_items, std::size_t feature_dim)
    : n_items_(n_items),
      feature_dim_(feature_dim),
      weights_(n_items * feature_dim, 0.0),
      bias_(n_items, 0.0) {}

std::vector<double> LinearRecommender::scores(const SparseFeatures& features) const {
  std::vector<double> out(bias_);
  for (const auto& [f, v] : features) {
    const double* col = weights_.data() + f;
    for (std::size_t a = 0; a < n_items_; ++a) out[a] += col[a * feature_dim_] * v;
  }
  return out;
}

std::vector<double> LinearRecommender::softmax(const std::vector<double>& scores) {
  std::vector<double> out(scores.size());
  const double max_score = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - max_score);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

namespace {

struct LossEval {
  double total = 0.0;
  std::vector<double> grad_factor;  // d total / d p_true per example
};

// p holds the softmax probability of the true item per example (y = 1).
LossEval eval_loss(LossKind kind, const std::vector<double>& p,
                   const std::vector<std::int64_t>& classes, const std::vector<double>& pops,
                   const AcflConfig& cfg, const ClassStats& stats, bool want_grad) {
  const std::size_t n = p.size();
  LossEval out;
  if (kind == LossKind::acfl) {
    std::vector<int> labels(n, 1);
    AcflTerms terms = acfl_terms(p, labels, classes, pops, cfg, stats);
    out.total = terms.total;
    if (want_grad) {
      out.grad_factor.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (terms.mask[i])
          out.grad_factor[i] = terms.dloss_dp[i] / static_cast<double>(terms.mask_count);
      }
    }
    return out;
  }

  std::vector<double> losses(n);
  if (want_grad) out.grad_factor.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = clamp_probability(p[i]);
    if (kind == LossKind::ce) {
      losses[i] = -std::log(pi);
      if (want_grad) out.grad_factor[i] = (-1.0 / pi) / static_cast<double>(n);
    } else {  // static focal with the configured alpha/gamma
      const double u = 1.0 - pi;
      const double pow_term = std::pow(u, cfg.gamma);
      losses[i] = -cfg.alpha * pow_term * std::log(pi);
      if (want_grad) {
        const double dpow = cfg.gamma > 0.0 ? -cfg.gamma * std::pow(u, cfg.gamma - 1.0) : 0.0;
        const double d = -cfg.alpha * (dpow * std::log(pi) + pow_term / pi);
        out.grad_factor[i] = d / static_cast<double>(n);
      }
    }
  }
  out.total = pairwise_sum(losses) / static_cast<double>(n);
  return out;
}

}  // namespace

TrainResult train(const SyntheticData& data, LossKind kind, const AcflConfig& cfg,
                  const TrainOptions& options) {
  if (data.corpus.dialogues.empty()) fail(ErrorKind::invariant, "train: empty corpus");
  if (data.labels.size() != data.corpus.dialogues.size())
    fail(ErrorKind::invariant, "train: label/dialogue count mismatch");

  std::map<std::string, std::size_t> item_index;
  for (std::size_t i = 0; i < data.item_ids.size(); ++i) item_index[data.item_ids[i]] = i;
  const std::vector<SparseFeatures> features =
      extract_features(data.corpus, item_index, options.text_dim);

  // Split: shuffled dialogue indices, first val_fraction held out.
  std::vector<std::size_t> order(data.corpus.dialogues.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = Rng::derive(options.seed, "train:split");
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(
      std::floor(options.val_fraction * static_cast<double>(order.size())));
  TrainResult result{LinearRecommender(data.item_ids.size(),
                                       data.item_ids.size() + options.text_dim),
                     {},
                     {},
                     {}};
  result.val_indices.assign(order.begin(), order.begin() + n_val);
  result.train_indices.assign(order.begin() + n_val, order.end());
  if (result.train_indices.empty()) fail(ErrorKind::invariant, "train: empty training split");

  // Class stats and label-item popularity from the training split only.
  std::map<std::int64_t, std::int64_t> counts;
  for (std::size_t i = 0; i < data.item_ids.size(); ++i) counts[static_cast<std::int64_t>(i)] = 0;
  for (std::size_t idx : result.train_indices) counts[data.labels[idx]] += 1;
  const ClassStats stats = ClassStats::from_counts(std::move(counts));

  std::vector<double> item_pop(data.item_ids.size(), 0.0);
  for (std::size_t idx : result.train_indices) {
    for (const std::string& m : data.corpus.dialogues[idx].mentions) {
      auto it = item_index.find(m);
      if (it != item_index.end()) item_pop[it->second] += 1.0;
    }
  }

  AcflConfig effective = cfg;
  if (options.resample && kind == LossKind::acfl) effective.use_sample_weights = false;

  const std::size_t n_items = data.item_ids.size();
  const std::size_t dim = result.model.feature_dim();
  LinearRecommender& model = result.model;
  Rng resample_rng = Rng::derive(options.seed, "train:resample");

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<std::size_t> batch = result.train_indices;
    if (options.resample && kind == LossKind::acfl) {
      const auto ws = sample_weights(stats, cfg.theta_min, cfg.theta_max);
      std::vector<double> cumulative;
      cumulative.reserve(batch.size());
      double acc = 0.0;
      for (std::size_t idx : result.train_indices) {
        acc += ws.at(data.labels[idx]);
        cumulative.push_back(acc);
      }
      std::vector<std::size_t> drawn;
      drawn.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const double ticket = resample_rng.real() * acc;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), ticket);
        drawn.push_back(result.train_indices[static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(batch.size()) - 1))]);
      }
      batch = std::move(drawn);
    }

    // Forward pass over the batch.
    std::vector<std::vector<double>> probs(batch.size());
    std::vector<double> p_true(batch.size());
    std::vector<std::int64_t> classes(batch.size());
    std::vector<double> pops(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      probs[b] = LinearRecommender::softmax(model.scores(features[batch[b]]));
      const std::int64_t label = data.labels[batch[b]];
      p_true[b] = probs[b][static_cast<std::size_t>(label)];
      classes[b] = label;
      pops[b] = item_pop[static_cast<std::size_t>(label)];
    }

    const LossEval train_eval =
        eval_loss(kind, p_true, classes, pops, effective, stats, true);
    if (!std::isfinite(train_eval.total))
      fail(ErrorKind::invariant, "train: loss diverged (non-finite) at epoch " +
                                     std::to_string(epoch) + " under " + loss_kind_name(kind));

    // Backward: d total/d score_a = grad_factor * p_true * (1{a==label} - s_a).
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const double g = train_eval.grad_factor[b];
      if (g == 0.0) continue;
      const std::size_t label = static_cast<std::size_t>(data.labels[batch[b]]);
      const double coef = g * p_true[b];
      const std::vector<double>& s = probs[b];
      for (std::size_t a = 0; a < n_items; ++a) {
        const double dscore = coef * ((a == label ? 1.0 : 0.0) - s[a]);
        if (dscore == 0.0) continue;
        model.bias()[a] -= options.lr * dscore;
        double* row = model.weights().data() + a * dim;
        for (const auto& [f, v] : features[batch[b]]) row[f] -= options.lr * dscore * v;
      }
    }

    // Validation loss under the same objective.
    double val_loss = 0.0;
    if (!result.val_indices.empty()) {
      std::vector<double> vp(result.val_indices.size());
      std::vector<std::int64_t> vc(result.val_indices.size());
      std::vector<double> vpop(result.val_indices.size());
      for (std::size_t b = 0; b < result.val_indices.size(); ++b) {
        const std::size_t idx = result.val_indices[b];
        const auto s = LinearRecommender::softmax(model.scores(features[idx]));
        vp[b] = s[static_cast<std::size_t>(data.labels[idx])];
        vc[b] = data.labels[idx];
        vpop[b] = item_pop[static_cast<std::size_t>(data.labels[idx])];
      }
      val_loss = eval_loss(kind, vp, vc, vpop, effective, stats, false).total;
    }
    result.curve.push_back({epoch, train_eval.total, val_loss});
  }
  return result;
}

std::string curve_to_csv(const std::vector<EpochRecord>& curve) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  out.precision(17);
  for (const EpochRecord& r : curve)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
  return out.str();
}

std::vector<RankedList> rank_validation(const LinearRecommender& model,
                                        const SyntheticData& data,
                                        const std::vector<SparseFeatures>& features,
                                        const std::vector<std::size_t>& val_indices, int k) {
  std::vector<RankedList> lists;
  lists.reserve(val_indices.size());
  for (std::size_t idx : val_indices) {
    const std::vector<double> scores = model.scores(features[idx]);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    RankedList list;
    list.query_id = data.corpus.dialogues[idx].id;
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
    for (std::size_t i = 0; i < kk; ++i) list.ranking.push_back(data.item_ids[order[i]]);
    list.relevant.insert(data.item_ids[static_cast<std::size_t>(data.labels[idx])]);
    lists.push_back(std::move(list));
  }
  return lists;
}

namespace {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ComparisonReport experiment(const ExperimentOptions& options) {
  if (options.n_seeds < 1) fail(ErrorKind::config, "experiment: need at least one seed");
  if (options.kinds.empty()) fail(ErrorKind::config, "experiment: need at least one loss kind");
  ComparisonReport report;
  report.k_values = options.k_values;
  const int k_max =
      *std::max_element(options.k_values.begin(), options.k_values.end());

  for (int s = 0; s < options.n_seeds; ++s) {
    SyntheticSpec spec = options.spec;
    spec.seed = options.spec.seed + static_cast<std::uint64_t>(s);
    const SyntheticData data = gen_synthetic(spec);

    std::map<std::string, std::size_t> item_index;
    for (std::size_t i = 0; i < data.item_ids.size(); ++i) item_index[data.item_ids[i]] = i;
    const std::vector<SparseFeatures> features =
        extract_features(data.corpus, item_index, options.train.text_dim);
    const auto item_vectors = item_comention_vectors(data.corpus);

    for (LossKind kind : options.kinds) {
      TrainOptions topt = options.train;
      topt.seed = spec.seed;
      const TrainResult trained = train(data, kind, options.acfl, topt);
      report.curves[std::string(loss_kind_name(kind)) + "_" + std::to_string(spec.seed)] =
          trained.curve;

      // Tail set and popularity from the training split the model saw.
      Corpus train_corpus;
      train_corpus.catalog = data.corpus.catalog;
      for (std::size_t idx : trained.train_indices)
        train_corpus.dialogues.push_back(data.corpus.dialogues[idx]);
      const PopularityTable pop = compute_popularity(train_corpus);
      const Segmentation seg = segment(pop, 1, 5);
      std::map<std::string, double> pop_real;
      for (const auto& [id, count] : pop.pop) pop_real[id] = static_cast<double>(count);

      const std::vector<RankedList> lists =
          rank_validation(trained.model, data, features, trained.val_indices, k_max);

      SeedRow row;
      row.kind = kind;
      row.seed = spec.seed;
      for (int k : options.k_values) {
        const std::string suffix = "@" + std::to_string(k);
        row.metrics["recall" + suffix] = recall_at_k(lists, k);
        if (auto tr = tail_recall_at_k(lists, k, seg.tail))
          row.metrics["tail_recall" + suffix] = *tr;
        row.metrics["coverage" + suffix] =
            coverage_at_k(lists, k, static_cast<std::int64_t>(data.corpus.catalog.size()));
        if (auto ild = ild_at_k(lists, k, item_vectors)) row.metrics["ild" + suffix] = *ild;
      }
      row.metrics["pwp@10"] = pwp(lists, 10, pop_real);
      report.rows.push_back(std::move(row));
    }
  }

  // Per-kind medians.
  for (LossKind kind : options.kinds) {
    std::map<std::string, std::vector<double>> collected;
    for (const SeedRow& row : report.rows) {
      if (row.kind != kind) continue;
      for (const auto& [name, value] : row.metrics) collected[name].push_back(value);
    }
    auto& med = report.medians[loss_kind_name(kind)];
    for (auto& [name, values] : collected) med[name] = median(values);
  }

  // ACFL-vs-CE win counts on the headline directional metrics.
  const bool has_ce = std::count(options.kinds.begin(), options.kinds.end(), LossKind::ce) > 0;
  const bool has_acfl =
      std::count(options.kinds.begin(), options.kinds.end(), LossKind::acfl) > 0;
  if (has_ce && has_acfl) {
    int tail_wins = 0, pwp_wins = 0, n = 0;
    for (int s = 0; s < options.n_seeds; ++s) {
      const std::uint64_t seed = options.spec.seed + static_cast<std::uint64_t>(s);
      const SeedRow* ce_row = nullptr;
      const SeedRow* acfl_row = nullptr;
      for (const SeedRow& row : report.rows) {
        if (row.seed != seed) continue;
        if (row.kind == LossKind::ce) ce_row = &row;
        if (row.kind == LossKind::acfl) acfl_row = &row;
      }
      if (ce_row == nullptr || acfl_row == nullptr) continue;
      ++n;
      const auto get = [](const SeedRow& row, const std::string& name) {
        auto it = row.metrics.find(name);
        return it == row.metrics.end() ? 0.0 : it->second;
      };
      if (get(*acfl_row, "tail_recall@10") > get(*ce_row, "tail_recall@10")) ++tail_wins;
      if (get(*acfl_row, "pwp@10") < get(*ce_row, "pwp@10")) ++pwp_wins;
    }
    report.win_counts["acfl_tail_recall@10_gt_ce"] =
        std::to_string(tail_wins) + "/" + std::to_string(n);
    report.win_counts["acfl_pwp@10_lt_ce"] = std::to_string(pwp_wins) + "/" + std::to_string(n);
  }
  return report;
}

std::string ComparisonReport::to_json_string() const {
  json doc;
  json rows_json = json::array();
  for (const SeedRow& row : rows) {
    rows_json.push_back(
        {{"loss", loss_kind_name(row.kind)}, {"seed", row.seed}, {"metrics", row.metrics}});
  }
  doc["rows"] = rows_json;
  doc["medians"] = medians;
  doc["win_counts"] = win_counts;
  doc["k_values"] = k_values;
  return doc.dump(2);
}

std::string ComparisonReport::to_markdown() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  std::vector<std::string> columns;
  for (int k : k_values) {
    columns.push_back("recall@" + std::to_string(k));
    columns.push_back("tail_recall@" + std::to_string(k));
    columns.push_back("coverage@" + std::to_string(k));
    columns.push_back("ild@" + std::to_string(k));
  }
  columns.push_back("pwp@10");

  out << "| loss | seed |";
  for (const std::string& c : columns) out << ' ' << c << " |";
  out << "\n|------|------|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "----|";
  out << "\n";
  for (const SeedRow& row : rows) {
    out << "| " << loss_kind_name(row.kind) << " | " << row.seed << " |";
    for (const std::string& c : columns) {
      auto it = row.metrics.find(c);
      if (it == row.metrics.end()) {
        out << " - |";
      } else {
        out << ' ' << it->second << " |";
      }
    }
    out << "\n";
  }
  out << "\nMedians:\n\n";
  for (const auto& [loss, metrics] : medians) {
    out << "- " << loss << ":";
    for (const std::string& c : columns) {
      auto it = metrics.find(c);
      if (it != metrics.end()) out << ' ' << c << '=' << it->second;
    }
    out << "\n";
  }
  if (!win_counts.empty()) {
    out << "\nWin counts:\n\n";
    for (const auto& [name, value] : win_counts) out << "- " << name << ": " << value << "\n";
  }
  return out.str();
}

}  // namespace lumi
