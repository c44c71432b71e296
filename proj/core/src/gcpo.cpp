#include "prefforge/gcpo.hpp"

#include <algorithm>
#include <cmath>

#include "prefforge/errors.hpp"
#include "prefforge/trace_protocol.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

void check_groups(std::span<const double> winner_scores,
                  std::span<const double> loser_scores, double tie_delta) {
  if (winner_scores.empty() || loser_scores.empty())
    throw Error(Errc::group_size_mismatch, "score groups must be nonempty");
  if (winner_scores.size() != loser_scores.size())
    throw Error(Errc::group_size_mismatch,
                "winner group has " + std::to_string(winner_scores.size()) +
                    " scores, loser group " + std::to_string(loser_scores.size()));
  for (double s : winner_scores)
    if (!std::isfinite(s))
      throw Error(Errc::non_finite_score, "winner score is not finite");
  for (double s : loser_scores)
    if (!std::isfinite(s))
      throw Error(Errc::non_finite_score, "loser score is not finite");
  if (!std::isfinite(tie_delta) || tie_delta < 0.0)
    throw Error(Errc::invariant_violation, "tie_delta: must be finite and >= 0");
}

double clip(double r, double eps) {
  return std::min(std::max(r, 1.0 - eps), 1.0 + eps);
}

// min(r*A, clip(r)*A) and whether the gradient flows (unclipped branch
// active).
struct Surrogate {
  double value;
  bool pass_through;
};

Surrogate clipped_surrogate(double ratio, double advantage, double eps) {
  double plain = ratio * advantage;
  double clipped = clip(ratio, eps) * advantage;
  if (plain <= clipped) return {plain, true};
  return {clipped, false};
}

void check_ratio_shape(const TokenRatioRecord& ratios, const RolloutGroup& group,
                       const char* side) {
  if (ratios.ratios.size() != group.traces.size())
    throw Error(Errc::shape_mismatch,
                std::string(side) + " ratio record covers " +
                    std::to_string(ratios.ratios.size()) + " traces, group has " +
                    std::to_string(group.traces.size()));
  for (std::size_t j = 0; j < group.traces.size(); ++j) {
    if (ratios.ratios[j].size() != group.traces[j].length())
      throw Error(Errc::shape_mismatch,
                  std::string(side) + " trace " + std::to_string(j) + " has " +
                      std::to_string(group.traces[j].length()) +
                      " tokens but " + std::to_string(ratios.ratios[j].size()) +
                      " ratios");
    if (group.traces[j].length() == 0)
      throw Error(Errc::zero_length_trace,
                  std::string(side) + " trace " + std::to_string(j) +
                      " has no tokens");
    for (double r : ratios.ratios[j]) {
      if (!std::isfinite(r) || r <= 0.0)
        throw Error(Errc::non_positive_ratio,
                    std::string(side) + " trace " + std::to_string(j) +
                        " carries ratio " + format_double(r));
    }
  }
}

double side_objective(const RolloutGroup& group, const TokenRatioRecord& ratios,
                      std::span<const double> advantages, double eps,
                      const char* side) {
  check_ratio_shape(ratios, group, side);
  if (advantages.size() != group.traces.size())
    throw Error(Errc::shape_mismatch,
                std::string(side) + " advantages cover " +
                    std::to_string(advantages.size()) + " traces, group has " +
                    std::to_string(group.traces.size()));
  double total = 0.0;
  for (std::size_t j = 0; j < group.traces.size(); ++j) {
    double per_token = 0.0;
    for (double r : ratios.ratios[j])
      per_token += clipped_surrogate(r, advantages[j], eps).value;
    total += per_token / static_cast<double>(ratios.ratios[j].size());
  }
  return total;
}

// Score a rollout through the wire protocol: emit, then re-extract. Traces
// that cannot be emitted or whose text does not parse take the floor score.
double protocol_score(const ReasoningTrace& trace, const PrincipleSet& principles,
                      double floor) {
  try {
    return score_or_floor(emit_trace(trace, principles), floor);
  } catch (...) {
    return floor;
  }
}

}  // namespace

WinLossRatios win_loss_ratios(std::span<const double> winner_scores,
                              std::span<const double> loser_scores,
                              double tie_delta) {
  check_groups(winner_scores, loser_scores, tie_delta);
  const std::size_t n = winner_scores.size();
  std::vector<double> sorted_w(winner_scores.begin(), winner_scores.end());
  std::vector<double> sorted_l(loser_scores.begin(), loser_scores.end());
  std::sort(sorted_w.begin(), sorted_w.end());
  std::sort(sorted_l.begin(), sorted_l.end());

  WinLossRatios out;
  out.win.reserve(n);
  out.loss.reserve(n);
  const double inv = 1.0 / static_cast<double>(n);
  for (double w : winner_scores) {
    // Losers defeated by w form a prefix of the sorted losers: w - l is
    // non-increasing in l, so the predicate flips exactly once.
    auto it = std::partition_point(
        sorted_l.begin(), sorted_l.end(),
        [&](double l) { return w - l > tie_delta; });
    out.win.push_back(inv * static_cast<double>(it - sorted_l.begin()));
  }
  for (double l : loser_scores) {
    // Winners defeating l form a suffix of the sorted winners.
    auto it = std::partition_point(
        sorted_w.begin(), sorted_w.end(),
        [&](double w) { return !(w - l > tie_delta); });
    out.loss.push_back(inv * static_cast<double>(sorted_w.end() - it));
  }
  return out;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.empty())
    throw Error(Errc::empty_group, "cannot center an empty reward group");
  double mean = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r))
      throw Error(Errc::non_finite_score, "reward is not finite");
    mean += r;
  }
  mean /= static_cast<double>(rewards.size());
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back(r - mean);
  return out;
}

double gcpo_objective(const PairedRollouts& rollouts,
                      const TokenRatioRecord& ratios_w,
                      const TokenRatioRecord& ratios_l,
                      std::span<const double> advantages_w,
                      std::span<const double> advantages_l,
                      const OptimizerConfig& cfg) {
  validate(cfg);
  if (rollouts.winner_group.traces.size() != rollouts.loser_group.traces.size())
    throw Error(Errc::group_size_mismatch,
                "winner and loser groups must have the same size");
  const std::size_t n = rollouts.winner_group.traces.size();
  if (n == 0) throw Error(Errc::empty_group, "rollout groups are empty");
  double total =
      side_objective(rollouts.winner_group, ratios_w, advantages_w,
                     cfg.clip_epsilon, "winner") +
      side_objective(rollouts.loser_group, ratios_l, advantages_l,
                     cfg.clip_epsilon, "loser");
  return total / (2.0 * static_cast<double>(n));
}

namespace {

struct SideGrad {
  double objective_part = 0.0;  // sum over traces of per-token mean surrogate
};

// Accumulates one group's surrogate value and gradient into `gradient`.
// scale multiplies every contribution (1 / (2N * batch) for GCPO).
SideGrad accumulate_side(const ScoringPolicy& policy, const RolloutGroup& group,
                         std::span<const double> advantages,
                         std::span<const double> params, double eps,
                         double scale, std::vector<double>& gradient,
                         const char* side) {
  if (advantages.size() != group.traces.size())
    throw Error(Errc::invariant_violation,
                std::string(side) + " group advantages must be populated");
  SideGrad out;
  for (std::size_t j = 0; j < group.traces.size(); ++j) {
    const ReasoningTrace& trace = group.traces[j];
    if (trace.length() == 0)
      throw Error(Errc::zero_length_trace,
                  std::string(side) + " trace " + std::to_string(j) +
                      " has no tokens");
    std::vector<double> logp =
        policy.token_logprobs(group.sample, trace, params);
    if (logp.size() != trace.length())
      throw Error(Errc::shape_mismatch, "policy returned wrong logprob count");
    const double inv_t = 1.0 / static_cast<double>(trace.length());
    std::vector<double> weights(trace.length(), 0.0);
    bool any_weight = false;
    double per_token = 0.0;
    for (std::size_t t = 0; t < trace.length(); ++t) {
      double ratio = std::exp(logp[t] - trace.token_logprobs_old[t]);
      if (!std::isfinite(ratio) || ratio <= 0.0)
        throw Error(Errc::non_positive_ratio,
                    "token ratio is not positive and finite");
      Surrogate s = clipped_surrogate(ratio, advantages[j], eps);
      per_token += s.value;
      if (s.pass_through && advantages[j] != 0.0) {
        weights[t] = scale * inv_t * advantages[j] * ratio;
        any_weight = true;
      }
    }
    out.objective_part += per_token * inv_t;
    if (any_weight) {
      std::vector<double> g =
          policy.weighted_logprob_grad(group.sample, trace, weights, params);
      if (g.size() != gradient.size())
        throw Error(Errc::shape_mismatch, "policy returned wrong gradient size");
      for (std::size_t d = 0; d < gradient.size(); ++d) gradient[d] += g[d];
    }
  }
  return out;
}

}  // namespace

GcpoEvaluation gcpo_evaluate(const ScoringPolicy& policy,
                             std::span<const PairedRollouts> batch,
                             std::span<const double> params,
                             const OptimizerConfig& cfg) {
  validate(cfg);
  if (batch.empty()) throw Error(Errc::empty_batch, "no rollout pairs");
  if (params.size() != policy.param_count())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");

  GcpoEvaluation out;
  out.gradient.assign(params.size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const PairedRollouts& pr : batch) {
    const std::size_t n = pr.winner_group.traces.size();
    if (n == 0 || pr.loser_group.traces.size() != n)
      throw Error(Errc::group_size_mismatch,
                  "rollout groups must be nonempty and equally sized");
    const double scale = inv_batch / (2.0 * static_cast<double>(n));
    SideGrad w = accumulate_side(policy, pr.winner_group,
                                 pr.winner_group.advantages, params,
                                 cfg.clip_epsilon, scale, out.gradient, "winner");
    SideGrad l = accumulate_side(policy, pr.loser_group,
                                 pr.loser_group.advantages, params,
                                 cfg.clip_epsilon, scale, out.gradient, "loser");
    out.objective +=
        (w.objective_part + l.objective_part) / (2.0 * static_cast<double>(n));
  }
  out.objective *= inv_batch;
  return out;
}

std::vector<PairedRollouts> gcpo_collect_rollouts(
    const ScoringPolicy& policy, std::span<const PreferencePair> batch,
    const OptimizerConfig& cfg, const GcpoStepOptions& options) {
  validate(cfg);
  std::vector<const PreferencePair*> usable;
  for (const PreferencePair& pair : batch) {
    validate(pair);
    if (pair.label != PreferenceLabel::Same) usable.push_back(&pair);
  }
  if (usable.empty())
    throw Error(Errc::empty_batch, "no non-Same preference pairs in the batch");

  const std::size_t n = static_cast<std::size_t>(cfg.group_size);
  std::vector<PairedRollouts> out(usable.size());
  parallel_for(usable.size(), options.parallelism, [&](std::size_t p) {
    const PreferencePair& pair = *usable[p];
    PairedRollouts pr;
    pr.pair = pair;
    // WinnerRight stores the preferred side in `loser`; swap so the winner
    // group really holds the preferred sample.
    const Quadruple& win_quad =
        pair.label == PreferenceLabel::WinnerRight ? pair.loser : pair.winner;
    const Quadruple& lose_quad =
        pair.label == PreferenceLabel::WinnerRight ? pair.winner : pair.loser;
    pr.winner_group.sample = win_quad;
    pr.loser_group.sample = lose_quad;
    auto fill = [&](RolloutGroup& group, std::uint64_t side) {
      group.traces.reserve(n);
      group.scores.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        std::uint64_t seed = derive_seed(
            static_cast<std::uint64_t>(cfg.seed), {p, side, j});
        group.traces.push_back(policy.sample_trace(group.sample, seed));
        group.scores.push_back(protocol_score(
            group.traces.back(), group.sample.principles, options.floor_score));
      }
    };
    fill(pr.winner_group, 0);
    fill(pr.loser_group, 1);
    WinLossRatios ratios =
        win_loss_ratios(pr.winner_group.scores, pr.loser_group.scores,
                        options.tie_delta);
    pr.winner_group.rewards = ratios.win;
    pr.loser_group.rewards = ratios.loss;
    pr.winner_group.advantages = group_advantages(pr.winner_group.rewards);
    pr.loser_group.advantages = group_advantages(pr.loser_group.rewards);
    out[p] = std::move(pr);
  });
  return out;
}

GcpoStepReport gcpo_step(ScoringPolicy& policy,
                         std::span<const PreferencePair> batch,
                         const OptimizerConfig& cfg,
                         const GcpoStepOptions& options) {
  std::vector<PairedRollouts> rollouts =
      gcpo_collect_rollouts(policy, batch, cfg, options);
  std::vector<double> params = policy.params();
  GcpoEvaluation eval = gcpo_evaluate(policy, rollouts, params, cfg);

  GcpoStepReport report;
  report.objective = eval.objective;
  double win_sum = 0.0;
  double loss_sum = 0.0;
  double adv_over_len = 0.0;
  std::size_t count = 0;
  for (const PairedRollouts& pr : rollouts) {
    for (std::size_t j = 0; j < pr.winner_group.traces.size(); ++j) {
      win_sum += pr.winner_group.rewards[j];
      loss_sum += pr.loser_group.rewards[j];
      adv_over_len += pr.winner_group.advantages[j] /
                      static_cast<double>(pr.winner_group.traces[j].length());
      adv_over_len += pr.loser_group.advantages[j] /
                      static_cast<double>(pr.loser_group.traces[j].length());
      ++count;
    }
  }
  report.mean_win_ratio = win_sum / static_cast<double>(count);
  report.mean_loss_ratio = loss_sum / static_cast<double>(count);
  report.weighted_advantage = adv_over_len / static_cast<double>(2 * count);

  for (std::size_t d = 0; d < params.size(); ++d)
    params[d] += cfg.learning_rate * eval.gradient[d];
  policy.set_params(params);
  return report;
}

}  // namespace prefforge
