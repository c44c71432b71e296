#ifndef PREFFORGE_GCPO_HPP_
#define PREFFORGE_GCPO_HPP_

#include <span>
#include <vector>

#include "prefforge/domain.hpp"
#include "prefforge/policy.hpp"

namespace prefforge {

// Group Contrastive Preference Optimization: trains a pointwise scoring
// policy from pairwise preferences. Rewards are cross-group win/loss ratios;
// advantages are centered within each group; the objective is the sum of the
// two groups' clipped surrogates with no KL term. The training step performs
// gradient ascent on the objective.

/// Rollout groups for the two sides of one preference pair.
struct PairedRollouts {
  PreferencePair pair;
  RolloutGroup winner_group;
  RolloutGroup loser_group;
};

/// Per-trace sequences of per-token likelihood ratios
/// exp(logprob_current - logprob_old).
struct TokenRatioRecord {
  std::vector<std::vector<double>> ratios;

  std::vector<std::size_t> lengths() const {
    std::vector<std::size_t> out;
    out.reserve(ratios.size());
    for (const auto& r : ratios) out.push_back(r.size());
    return out;
  }
};

struct WinLossRatios {
  std::vector<double> win;   // r^w_j, one per winner-side trace
  std::vector<double> loss;  // r^l_j, one per loser-side trace
};

/// Exhaustive cross-group comparison rewards, both in [0,1]:
///   win[j]  = (1/N) * |{k : winner[j] - loser[k]  > tie_delta}|
///   loss[j] = (1/N) * |{k : winner[k] - loser[j]  > tie_delta}|
/// Ties (|difference| <= tie_delta) contribute to neither side. Groups must
/// have the same nonzero size and finite scores.
WinLossRatios win_loss_ratios(std::span<const double> winner_scores,
                              std::span<const double> loser_scores,
                              double tie_delta = 0.0);

/// Within-group advantages A_j = r_j - mean(r). Throws on an empty group.
std::vector<double> group_advantages(std::span<const double> rewards);

/// The two-group clipped surrogate for one preference pair:
///   (1/2N) sum_j [ (1/T^w_j) sum_t min(r A^w_j, clip(r, 1-eps, 1+eps) A^w_j)
///                + (1/T^l_j) sum_t min(r A^l_j, clip(r, 1-eps, 1+eps) A^l_j) ]
/// Each trace is normalized by its own token count. The trainer maximizes
/// this value. Ratios must be positive and finite; shapes must agree with
/// the rollout groups.
double gcpo_objective(const PairedRollouts& rollouts,
                      const TokenRatioRecord& ratios_w,
                      const TokenRatioRecord& ratios_l,
                      std::span<const double> advantages_w,
                      std::span<const double> advantages_l,
                      const OptimizerConfig& cfg);

struct GcpoEvaluation {
  double objective = 0.0;
  std::vector<double> gradient;  // d objective / d params
};

/// Objective (mean over pairs) and its analytic gradient, evaluated at
/// `params`. Token ratios are rebuilt as exp(logprob(params) - logprob_old)
/// from each trace's recorded old log-probabilities, so this is a pure
/// function of `params` for fixed rollouts — the form the finite-difference
/// oracle checks. Groups must carry populated `advantages`.
GcpoEvaluation gcpo_evaluate(const ScoringPolicy& policy,
                             std::span<const PairedRollouts> batch,
                             std::span<const double> params,
                             const OptimizerConfig& cfg);

struct GcpoStepReport {
  double objective = 0.0;
  double mean_win_ratio = 0.0;
  double mean_loss_ratio = 0.0;
  // (1/G) sum_j A_j / L_j over every rollout of the step, L = token count.
  double weighted_advantage = 0.0;

  bool operator==(const GcpoStepReport&) const = default;
};

struct GcpoStepOptions {
  double tie_delta = 0.0;
  double floor_score = 0.0;  // score assigned to malformed traces
  int parallelism = 1;       // rollout fan-out across pairs
};

/// One GCPO update: rolls out cfg.group_size traces per side of every
/// non-Same pair in `batch`, scores them through the text protocol, computes
/// ratio rewards and within-group advantages, and applies one gradient
/// ascent step. Same-labeled pairs are dropped; an effectively empty batch
/// throws Error{empty_batch}. Deterministic for fixed seed/config/data.
GcpoStepReport gcpo_step(ScoringPolicy& policy,
                         std::span<const PreferencePair> batch,
                         const OptimizerConfig& cfg,
                         const GcpoStepOptions& options = {});

/// The rollout/score/reward/advantage stage of gcpo_step without the
/// parameter update. Exposed for tests and diagnostics.
std::vector<PairedRollouts> gcpo_collect_rollouts(
    const ScoringPolicy& policy, std::span<const PreferencePair> batch,
    const OptimizerConfig& cfg, const GcpoStepOptions& options = {});

}  // namespace prefforge

#endif  // PREFFORGE_GCPO_HPP_
