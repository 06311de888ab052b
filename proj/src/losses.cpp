#include "lumi/losses.hpp"

#include <algorithm>
#include <cmath>

#include "lumi/util.hpp"

namespace lumi {

const char* mask_direction_name(MaskDirection d) {
  return d == MaskDirection::geq_tau ? "geq_tau" : "leq_tau";
}

MaskDirection mask_direction_from_name(const std::string& name) {
  if (name == "geq_tau") return MaskDirection::geq_tau;
  if (name == "leq_tau") return MaskDirection::leq_tau;
  fail(ErrorKind::config, "unknown mask_direction: " + name);
}

void AcflConfig::validate() const {
  if (!(alpha_min <= alpha_max)) fail(ErrorKind::config, "AcflConfig: alpha_min > alpha_max");
  if (!(gamma_min <= gamma_max)) fail(ErrorKind::config, "AcflConfig: gamma_min > gamma_max");
  if (!(theta_min < theta_max)) fail(ErrorKind::config, "AcflConfig: theta_min must be < theta_max");
  if (!(k >= 0.0 && k < 1.0)) fail(ErrorKind::config, "AcflConfig: k must be in [0, 1)");
  if (!(epsilon > 0.0)) fail(ErrorKind::config, "AcflConfig: epsilon must be > 0");
  if (epsilon_alpha && !(*epsilon_alpha > 0.0))
    fail(ErrorKind::config, "AcflConfig: epsilon_alpha must be > 0");
  if (!(beta >= 0.0)) fail(ErrorKind::config, "AcflConfig: beta must be >= 0");
  if (!(gamma >= 0.0)) fail(ErrorKind::config, "AcflConfig: gamma must be >= 0");
}

ClassStats ClassStats::from_counts(std::map<std::int64_t, std::int64_t> counts) {
  ClassStats stats;
  stats.counts = std::move(counts);
  stats.n_max = 0;
  for (const auto& [cls, n] : stats.counts) {
    if (n < 0) fail(ErrorKind::invariant, "ClassStats: negative count");
    stats.n_max = std::max(stats.n_max, n);
  }
  return stats;
}

std::int64_t ClassStats::count_of(std::int64_t class_id) const {
  auto it = counts.find(class_id);
  if (it == counts.end())
    fail(ErrorKind::invariant, "ClassStats: unknown class id " + std::to_string(class_id));
  return it->second;
}

double clamp_probability(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

double ce_loss(double p, int y) {
  p = clamp_probability(p);
  return -(y == 1 ? std::log(p) : std::log(1.0 - p));
}

double focal_loss(double p, double alpha, double gamma, int y) {
  p = clamp_probability(p);
  const double pt = y == 1 ? p : 1.0 - p;
  return -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
}

std::map<std::int64_t, double> class_weights(const ClassStats& stats, double epsilon) {
  if (!(epsilon > 0.0)) fail(ErrorKind::config, "class_weights: epsilon must be > 0");
  std::map<std::int64_t, double> weights;
  for (const auto& [cls, n] : stats.counts)
    weights[cls] = 1.0 / (static_cast<double>(n) + epsilon);
  return weights;
}

std::map<std::int64_t, double> sample_weights(const ClassStats& stats, std::int64_t theta_min,
                                              std::int64_t theta_max) {
  if (stats.n_max < 1) fail(ErrorKind::invariant, "sample_weights: n_max must be >= 1");
  if (!(theta_min < theta_max && theta_max <= stats.n_max))
    fail(ErrorKind::config, "sample_weights: need theta_min < theta_max <= n_max");
  std::map<std::int64_t, double> weights;
  for (const auto& [cls, n] : stats.counts) {
    double w = 1.0;
    if (n < theta_min) {
      // 1 + 1/N_c is undefined at N_c = 0; cap at the N_c = 1 value.
      w = n == 0 ? 2.0 : 1.0 + 1.0 / static_cast<double>(n);
    } else if (n > theta_max) {
      w = 1.0 - static_cast<double>(n) / static_cast<double>(stats.n_max);
    }
    weights[cls] = w;
  }
  return weights;
}

double adaptive_alpha(double p, const AcflConfig& cfg) {
  if (!cfg.adaptive) return cfg.alpha;
  return std::clamp(cfg.alpha * p + cfg.effective_epsilon_alpha(), cfg.alpha_min, cfg.alpha_max);
}

double adaptive_gamma(double p, const AcflConfig& cfg) {
  if (!cfg.adaptive) return cfg.gamma;
  return std::clamp(cfg.gamma * (1.0 - p), cfg.gamma_min, cfg.gamma_max);
}

std::int64_t TopkMask::count() const {
  std::int64_t c = 0;
  for (std::uint8_t m : mask) c += m;
  return c;
}

TopkMask topk_mask(std::span<const double> probs, double k, MaskDirection direction) {
  if (probs.empty()) fail(ErrorKind::invariant, "topk_mask: empty probabilities");
  if (!(k >= 0.0 && k < 1.0)) fail(ErrorKind::config, "topk_mask: k must be in [0, 1)");
  const std::size_t n = probs.size();
  std::vector<double> sorted(probs.begin(), probs.end());
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank with an epsilon nudge so exact multiples of 1/n do not get
  // pushed up a rank by floating-point noise.
  const auto rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(k * static_cast<double>(n) - 1e-9)));
  TopkMask result;
  result.tau = sorted[rank - 1];
  result.mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool keep = direction == MaskDirection::geq_tau ? probs[i] >= result.tau
                                                          : probs[i] <= result.tau;
    result.mask[i] = keep ? 1 : 0;
  }
  return result;
}

double popularity_adjustment(double pop, double beta) {
  if (pop < 0.0) fail(ErrorKind::invariant, "popularity_adjustment: negative popularity");
  if (beta < 0.0) fail(ErrorKind::config, "popularity_adjustment: beta must be >= 0");
  return std::exp(-beta * pop);
}

AcflTerms acfl_terms(std::span<const double> probs, std::span<const int> labels,
                     std::span<const std::int64_t> class_ids,
                     std::span<const double> popularity, const AcflConfig& cfg,
                     const ClassStats& stats) {
  cfg.validate();
  const std::size_t n = probs.size();
  if (n == 0) fail(ErrorKind::invariant, "acfl: empty batch");
  if (labels.size() != n || class_ids.size() != n || popularity.size() != n)
    fail(ErrorKind::invariant, "acfl: batch field length mismatch");

  std::map<std::int64_t, double> wc;
  if (cfg.use_class_weights) wc = class_weights(stats, cfg.epsilon);
  std::map<std::int64_t, double> ws;
  if (cfg.use_sample_weights) ws = sample_weights(stats, cfg.theta_min, cfg.theta_max);
  const double eps_alpha = cfg.effective_epsilon_alpha();

  AcflTerms terms;
  terms.losses.resize(n);
  terms.dloss_dp.resize(n);
  std::vector<double> pt(n);

  for (std::size_t j = 0; j < n; ++j) {
    const double p = clamp_probability(probs[j]);
    const int y = labels[j];
    if (y != 0 && y != 1) fail(ErrorKind::invariant, "acfl: label must be 0 or 1");
    const double sign = y == 1 ? 1.0 : -1.0;
    pt[j] = y == 1 ? p : 1.0 - p;

    const std::int64_t n_c = stats.count_of(class_ids[j]);
    (void)n_c;  // membership check; weights below re-look-up by class id
    double weight = 1.0;
    if (cfg.use_class_weights) weight *= wc.at(class_ids[j]);
    if (cfg.use_sample_weights) weight *= ws.at(class_ids[j]);
    weight *= popularity_adjustment(popularity[j], cfg.beta);

    double alpha_t = cfg.alpha;
    double dalpha = 0.0;
    double gamma_t = cfg.gamma;
    double dgamma = 0.0;  // derivatives w.r.t. p_t; zero on clip boundaries
    if (cfg.adaptive) {
      const double raw_a = cfg.alpha * pt[j] + eps_alpha;
      alpha_t = std::clamp(raw_a, cfg.alpha_min, cfg.alpha_max);
      if (raw_a > cfg.alpha_min && raw_a < cfg.alpha_max) dalpha = cfg.alpha;
      const double raw_g = cfg.gamma * (1.0 - pt[j]);
      gamma_t = std::clamp(raw_g, cfg.gamma_min, cfg.gamma_max);
      if (raw_g > cfg.gamma_min && raw_g < cfg.gamma_max) dgamma = -cfg.gamma;
    }

    const double u = 1.0 - pt[j];  // >= kProbFloor after clamping
    const double pow_term = std::pow(u, gamma_t);
    const double dpow = pow_term * (dgamma * std::log(u) - gamma_t / u);
    const double focal = alpha_t * pow_term;
    const double dfocal = dalpha * pow_term + alpha_t * dpow;
    const double ce = -std::log(pt[j]);
    const double dce = -1.0 / pt[j];

    terms.losses[j] = weight * focal * ce;
    terms.dloss_dp[j] = weight * (dfocal * ce + focal * dce) * sign;
  }

  TopkMask mask = topk_mask(pt, cfg.k, cfg.mask_direction);
  terms.tau = mask.tau;
  terms.mask = std::move(mask.mask);
  terms.mask_count = 0;
  std::vector<double> selected;
  selected.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (terms.mask[j]) {
      ++terms.mask_count;
      selected.push_back(terms.losses[j]);
    }
  }
  terms.total = pairwise_sum(selected) / static_cast<double>(terms.mask_count);
  return terms;
}

namespace {

AcflTerms terms_from_batch(const Batch& batch, const AcflConfig& cfg, const ClassStats& stats,
                           std::vector<double>* probs_out) {
  std::vector<double> probs(batch.size());
  std::vector<int> labels(batch.size());
  std::vector<std::int64_t> class_ids(batch.size());
  std::vector<double> pops(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    probs[j] = 1.0 / (1.0 + std::exp(-batch[j].logit));
    labels[j] = batch[j].label;
    class_ids[j] = batch[j].class_id;
    pops[j] = batch[j].popularity;
  }
  if (probs_out != nullptr) *probs_out = probs;
  return acfl_terms(probs, labels, class_ids, pops, cfg, stats);
}

}  // namespace

AcflResult acfl_loss(const Batch& batch, const AcflConfig& cfg, const ClassStats& stats) {
  AcflTerms terms = terms_from_batch(batch, cfg, stats, nullptr);
  AcflResult result;
  result.total = terms.total;
  result.per_sample = std::move(terms.losses);
  result.mask = std::move(terms.mask);
  result.tau = terms.tau;
  return result;
}

std::vector<double> acfl_gradient(const Batch& batch, const AcflConfig& cfg,
                                  const ClassStats& stats) {
  std::vector<double> probs;
  AcflTerms terms = terms_from_batch(batch, cfg, stats, &probs);
  std::vector<double> grad(batch.size(), 0.0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (!terms.mask[j]) continue;  // tau is piecewise-constant in the logits
    const double p = probs[j];
    // Clamped probabilities are flat in the logit: subgradient 0.
    if (p <= kProbFloor || p >= 1.0 - kProbFloor) continue;
    const double dp_dz = p * (1.0 - p);
    grad[j] = terms.dloss_dp[j] * dp_dz / static_cast<double>(terms.mask_count);
  }
  return grad;
}

}  // namespace lumi
