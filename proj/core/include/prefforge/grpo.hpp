#ifndef PREFFORGE_GRPO_HPP_
#define PREFFORGE_GRPO_HPP_

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "prefforge/domain.hpp"
#include "prefforge/policy.hpp"

namespace prefforge {

// Group Relative Policy Optimization for the downstream generation policy:
// group rollouts, rewards from a non-differentiable reward function,
// group-normalized advantages, and a clipped + KL-penalized update.

/// Per-step log-probabilities of one generation trajectory under the three
/// parameter snapshots the objective needs.
struct Trajectory {
  std::vector<double> logp_current;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
};

/// A group of G generations for one context.
struct GenerationRollout {
  EditContext context;
  std::vector<std::string> outputs;  // opaque sample ids, length G
  std::vector<Trajectory> trajectories;
};

/// Reward function contract: plain real-valued, never differentiated.
/// The principle set pointer may be null when no principles are attached.
using RewardFn = std::function<double(
    const std::string& sample_id, const EditContext& ctx,
    const PrincipleSet* principles)>;

/// Group-normalized advantages A_i = (score_i - mean) / (pop_std + eps).
/// Uses the population standard deviation (divide by G); set
/// `sample_std = true` for the (G-1) variant.
std::vector<double> grpo_advantages(std::span<const double> scores,
                                    double std_epsilon,
                                    bool sample_std = false);

/// Mean over samples and steps of the clipped surrogate minus the KL
/// penalty:
///   (1/G) sum_i (1/T_i) sum_t [ min(r A_i, clip(r, 1-eps, 1+eps) A_i)
///                               - beta * (logp_current - logp_ref) ]
/// with r = exp(logp_current - logp_old). Maximized by the trainer.
double grpo_objective(const GenerationRollout& rollout,
                      std::span<const double> advantages,
                      const OptimizerConfig& cfg);

struct GrpoEvaluation {
  double objective = 0.0;
  std::vector<double> gradient;
};

/// Objective (mean over rollouts) and analytic gradient at `params` for
/// fixed generations; logp_current is rebuilt from the policy at `params`
/// while logp_old / logp_ref stay frozen in the trajectories.
GrpoEvaluation grpo_evaluate(
    const GenerationPolicy& policy,
    std::span<const GenerationRollout> rollouts,
    std::span<const std::vector<GeneratedSample>> samples,
    std::span<const std::vector<double>> advantages,
    std::span<const double> params, const OptimizerConfig& cfg);

struct GrpoStepReport {
  double objective = 0.0;
  double train_reward = 0.0;  // mean reward over this step's rollouts
  std::optional<double> eval_reward;
  double mean_kl = 0.0;

  bool operator==(const GrpoStepReport&) const = default;
};

struct GrpoStepOptions {
  double floor_reward = 0.0;  // assigned when reward_fn throws
  int parallelism = 1;
  // Reference parameters for the KL penalty; the policy's parameters at
  // trainer start when empty.
  std::vector<double> reference_params;
  // Held-out contexts; when nonempty the report carries their mean reward
  // under freshly generated samples.
  std::vector<ContextRecord> eval_contexts;
  std::uint64_t eval_seed = 0;
};

/// One GRPO update over `contexts`: G generations per context, rewards via
/// `reward_fn` (exceptions map to the floor reward), Eq.-style group
/// normalization, one gradient ascent step on the clipped + KL objective.
GrpoStepReport grpo_step(GenerationPolicy& policy, const RewardFn& reward_fn,
                         std::span<const ContextRecord> contexts,
                         const OptimizerConfig& cfg,
                         const GrpoStepOptions& options = {});

}  // namespace prefforge

#endif  // PREFFORGE_GRPO_HPP_
