#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lumi {

// Which side of the quantile threshold the Top-K mask keeps. The printed
// formula selects p >= tau (geq_tau, the default); the surrounding prose
// describes keeping lower-confidence samples (leq_tau). Both are supported.
enum class MaskDirection { geq_tau, leq_tau };

const char* mask_direction_name(MaskDirection d);
MaskDirection mask_direction_from_name(const std::string& name);

struct AcflConfig {
  double alpha = 0.6;   // base balance factor
  double gamma = 2.5;   // base focusing parameter
  double beta = 0.01;   // popularity decay
  double k = 0.25;      // Top-K quantile in [0, 1)
  double epsilon = 1.0; // smoothing, shared by class weights and the alpha
                        // schedule unless epsilon_alpha overrides it
  std::optional<double> epsilon_alpha;

  double alpha_min = 0.1;
  double alpha_max = 0.9;
  double gamma_min = 0.5;
  double gamma_max = 5.0;

  std::int64_t theta_min = 2;   // oversampling threshold
  std::int64_t theta_max = 20;  // undersampling threshold

  bool adaptive = true;  // false: alpha_t == alpha and gamma_t == gamma
  MaskDirection mask_direction = MaskDirection::geq_tau;

  // Force w_c == 1 / w_sample == 1 without faking class counts; needed for
  // the degeneration checks against Focal/CE inside the trainer.
  bool use_class_weights = true;
  bool use_sample_weights = true;

  double effective_epsilon_alpha() const { return epsilon_alpha.value_or(epsilon); }
  void validate() const;
};

struct ClassStats {
  std::map<std::int64_t, std::int64_t> counts;  // class id -> N_c
  std::int64_t n_max = 0;

  static ClassStats from_counts(std::map<std::int64_t, std::int64_t> counts);
  std::int64_t count_of(std::int64_t class_id) const;
};

struct BatchSample {
  double logit = 0.0;
  int label = 1;                 // y in {0, 1}
  std::int64_t class_id = 0;
  double popularity = 0.0;       // pop(x)
};
using Batch = std::vector<BatchSample>;

// Probabilities are clamped into [1e-7, 1 - 1e-7] before any log.
inline constexpr double kProbFloor = 1e-7;
double clamp_probability(double p);

// -[y ln p + (1 - y) ln(1 - p)]
double ce_loss(double p, int y);

// -alpha * (1 - p_t)^gamma * ln(p_t), with p_t = p if y == 1 else 1 - p.
double focal_loss(double p, double alpha, double gamma, int y);

// w_c = 1 / (N_c + epsilon) for every class in stats.
std::map<std::int64_t, double> class_weights(const ClassStats& stats, double epsilon);

// w_sample = 1 + 1/N_c below theta_min (capped at 2 for N_c = 0),
//            1 - N_c/N_max above theta_max, else 1.
// Requires theta_min < theta_max <= stats.n_max and n_max >= 1.
std::map<std::int64_t, double> sample_weights(const ClassStats& stats, std::int64_t theta_min,
                                              std::int64_t theta_max);

// clip(alpha * p + epsilon_alpha, alpha_min, alpha_max); alpha when static.
double adaptive_alpha(double p, const AcflConfig& cfg);

// clip(gamma * (1 - p), gamma_min, gamma_max); gamma when static.
double adaptive_gamma(double p, const AcflConfig& cfg);

struct TopkMask {
  double tau = 0.0;
  std::vector<std::uint8_t> mask;

  std::int64_t count() const;
};

// Nearest-rank quantile: tau = ascending-sorted value at 1-based rank
// max(1, ceil(k * n)). The mask always selects at least the tau element.
TopkMask topk_mask(std::span<const double> probs, double k, MaskDirection direction);

// exp(-beta * pop)
double popularity_adjustment(double pop, double beta);

struct AcflResult {
  double total = 0.0;
  std::vector<double> per_sample;        // l_j for every sample, masked or not
  std::vector<std::uint8_t> mask;
  double tau = 0.0;
};

// Per-sample terms evaluated directly on probabilities. The focal factor,
// the adaptive schedules and the Top-K mask all work on p_t, which is what
// makes the static configuration collapse exactly onto mean Focal Loss.
// dloss_dp is the exact derivative of l_j with respect to p_j (clip
// boundaries and the mask treated as locally constant).
struct AcflTerms {
  std::vector<double> losses;
  std::vector<double> dloss_dp;
  std::vector<std::uint8_t> mask;
  double tau = 0.0;
  std::int64_t mask_count = 0;
  double total = 0.0;
};

AcflTerms acfl_terms(std::span<const double> probs, std::span<const int> labels,
                     std::span<const std::int64_t> class_ids,
                     std::span<const double> popularity, const AcflConfig& cfg,
                     const ClassStats& stats);

AcflResult acfl_loss(const Batch& batch, const AcflConfig& cfg, const ClassStats& stats);

// d total / d logit_j through p = sigmoid(logit); zero for masked-out samples
// and on the probability clamp.
std::vector<double> acfl_gradient(const Batch& batch, const AcflConfig& cfg,
                                  const ClassStats& stats);

}  // namespace lumi
