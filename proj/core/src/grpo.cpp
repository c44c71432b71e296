#include "prefforge/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "prefforge/errors.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

double clip(double r, double eps) {
  return std::min(std::max(r, 1.0 - eps), 1.0 + eps);
}

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

void check_trajectory(const Trajectory& tr, std::size_t i) {
  const std::size_t t = tr.logp_current.size();
  if (t == 0)
    throw Error(Errc::zero_length_trace,
                "trajectory " + std::to_string(i) + " has no steps");
  if (tr.logp_old.size() != t || tr.logp_ref.size() != t)
    throw Error(Errc::shape_mismatch,
                "trajectory " + std::to_string(i) +
                    " log-probability tracks have unequal lengths");
  auto check_track = [&](const std::vector<double>& xs) {
    for (double x : xs)
      if (!std::isfinite(x))
        throw Error(Errc::non_finite_score,
                    "trajectory " + std::to_string(i) +
                        " has a non-finite log-probability");
  };
  check_track(tr.logp_current);
  check_track(tr.logp_old);
  check_track(tr.logp_ref);
}

}  // namespace

std::vector<double> grpo_advantages(std::span<const double> scores,
                                    double std_epsilon, bool sample_std) {
  if (scores.empty())
    throw Error(Errc::empty_group, "cannot normalize an empty score group");
  if (!std::isfinite(std_epsilon) || std_epsilon <= 0.0)
    throw Error(Errc::invariant_violation, "std_epsilon: must be > 0");
  if (sample_std && scores.size() < 2)
    throw Error(Errc::empty_group,
                "sample standard deviation needs at least two scores");
  double mean = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s))
      throw Error(Errc::non_finite_score, "score is not finite");
    mean += s;
  }
  mean /= static_cast<double>(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  double denom = sample_std ? static_cast<double>(scores.size() - 1)
                            : static_cast<double>(scores.size());
  double std = std::sqrt(ss / denom);
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back((s - mean) / (std + std_epsilon));
  return out;
}

double grpo_objective(const GenerationRollout& rollout,
                      std::span<const double> advantages,
                      const OptimizerConfig& cfg) {
  validate(cfg);
  const std::size_t g = rollout.trajectories.size();
  if (g == 0) throw Error(Errc::empty_group, "rollout has no trajectories");
  if (rollout.outputs.size() != g || advantages.size() != g)
    throw Error(Errc::shape_mismatch,
                "outputs, trajectories and advantages must align");
  double total = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const Trajectory& tr = rollout.trajectories[i];
    check_trajectory(tr, i);
    if (!std::isfinite(advantages[i]))
      throw Error(Errc::non_finite_score, "advantage is not finite");
    double per_step = 0.0;
    for (std::size_t t = 0; t < tr.logp_current.size(); ++t) {
      double ratio = std::exp(tr.logp_current[t] - tr.logp_old[t]);
      if (!std::isfinite(ratio) || ratio <= 0.0)
        throw Error(Errc::non_positive_ratio, "step ratio is not positive");
      per_step += clipped_surrogate(ratio, advantages[i], cfg.clip_epsilon).value;
      per_step -= cfg.kl_beta * (tr.logp_current[t] - tr.logp_ref[t]);
    }
    total += per_step / static_cast<double>(tr.logp_current.size());
  }
  return total / static_cast<double>(g);
}

GrpoEvaluation grpo_evaluate(
    const GenerationPolicy& policy,
    std::span<const GenerationRollout> rollouts,
    std::span<const std::vector<GeneratedSample>> samples,
    std::span<const std::vector<double>> advantages,
    std::span<const double> params, const OptimizerConfig& cfg) {
  validate(cfg);
  if (rollouts.empty()) throw Error(Errc::empty_batch, "no rollouts");
  if (samples.size() != rollouts.size() || advantages.size() != rollouts.size())
    throw Error(Errc::shape_mismatch,
                "rollouts, samples and advantages must align");
  if (params.size() != policy.param_count())
    throw Error(Errc::shape_mismatch, "parameter vector has wrong size");

  GrpoEvaluation out;
  out.gradient.assign(params.size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(rollouts.size());
  for (std::size_t m = 0; m < rollouts.size(); ++m) {
    GenerationRollout current = rollouts[m];
    const std::size_t g = current.trajectories.size();
    if (samples[m].size() != g)
      throw Error(Errc::shape_mismatch,
                  "sample list does not match the rollout group size");
    const double inv_g = 1.0 / static_cast<double>(g);
    for (std::size_t i = 0; i < g; ++i) {
      Trajectory& tr = current.trajectories[i];
      tr.logp_current =
          policy.step_logprobs(current.context, samples[m][i], params);
      check_trajectory(tr, i);
      const std::size_t steps = tr.logp_current.size();
      const double inv_t = 1.0 / static_cast<double>(steps);
      std::vector<double> weights(steps, 0.0);
      bool any_weight = false;
      for (std::size_t t = 0; t < steps; ++t) {
        double ratio = std::exp(tr.logp_current[t] - tr.logp_old[t]);
        Surrogate s =
            clipped_surrogate(ratio, advantages[m][i], cfg.clip_epsilon);
        double w = 0.0;
        if (s.pass_through) w += advantages[m][i] * ratio;
        w -= cfg.kl_beta;
        if (w != 0.0) {
          weights[t] = inv_batch * inv_g * inv_t * w;
          any_weight = true;
        }
      }
      if (any_weight) {
        std::vector<double> grad = policy.weighted_logprob_grad(
            current.context, samples[m][i], weights, params);
        if (grad.size() != out.gradient.size())
          throw Error(Errc::shape_mismatch,
                      "policy returned wrong gradient size");
        for (std::size_t d = 0; d < grad.size(); ++d)
          out.gradient[d] += grad[d];
      }
    }
    out.objective += inv_batch * grpo_objective(current, advantages[m], cfg);
  }
  return out;
}

GrpoStepReport grpo_step(GenerationPolicy& policy, const RewardFn& reward_fn,
                         std::span<const ContextRecord> contexts,
                         const OptimizerConfig& cfg,
                         const GrpoStepOptions& options) {
  validate(cfg);
  if (contexts.empty()) throw Error(Errc::empty_batch, "no contexts");
  if (!reward_fn) throw Error(Errc::invariant_violation, "reward_fn: must be set");

  const std::vector<double> old_params = policy.params();
  std::vector<double> ref_params = options.reference_params;
  if (ref_params.empty()) ref_params = old_params;
  if (ref_params.size() != old_params.size())
    throw Error(Errc::shape_mismatch, "reference parameters have wrong size");

  const std::size_t g = static_cast<std::size_t>(cfg.group_size);
  std::vector<GenerationRollout> rollouts(contexts.size());
  std::vector<std::vector<GeneratedSample>> samples(contexts.size());
  std::vector<std::vector<double>> advantages(contexts.size());
  std::vector<double> context_reward(contexts.size(), 0.0);

  parallel_for(contexts.size(), options.parallelism, [&](std::size_t m) {
    const ContextRecord& record = contexts[m];
    validate(record.context);
    GenerationRollout rollout;
    rollout.context = record.context;
    std::vector<GeneratedSample> generated;
    std::vector<double> rewards;
    generated.reserve(g);
    rewards.reserve(g);
    const PrincipleSet* principles =
        record.principles ? &*record.principles : nullptr;
    for (std::size_t i = 0; i < g; ++i) {
      std::uint64_t seed =
          derive_seed(static_cast<std::uint64_t>(cfg.seed), {m, i});
      GeneratedSample sample = policy.generate(record.context, seed);
      double reward;
      try {
        reward = reward_fn(sample.sample_id, record.context, principles);
      } catch (...) {
        reward = options.floor_reward;
      }
      if (!std::isfinite(reward)) reward = options.floor_reward;
      Trajectory tr;
      tr.logp_old = policy.step_logprobs(record.context, sample, old_params);
      tr.logp_current = tr.logp_old;  // single-epoch update: ratios start at 1
      tr.logp_ref = policy.step_logprobs(record.context, sample, ref_params);
      rollout.outputs.push_back(sample.sample_id);
      rollout.trajectories.push_back(std::move(tr));
      generated.push_back(std::move(sample));
      rewards.push_back(reward);
    }
    advantages[m] = grpo_advantages(rewards, cfg.std_epsilon);
    double sum = 0.0;
    for (double r : rewards) sum += r;
    context_reward[m] = sum / static_cast<double>(g);
    rollouts[m] = std::move(rollout);
    samples[m] = std::move(generated);
  });

  GrpoEvaluation eval =
      grpo_evaluate(policy, rollouts, samples, advantages, old_params, cfg);

  GrpoStepReport report;
  report.objective = eval.objective;
  double reward_sum = 0.0;
  for (double r : context_reward) reward_sum += r;
  report.train_reward = reward_sum / static_cast<double>(contexts.size());

  double kl_sum = 0.0;
  std::size_t kl_count = 0;
  for (const GenerationRollout& rollout : rollouts) {
    for (const Trajectory& tr : rollout.trajectories) {
      for (std::size_t t = 0; t < tr.logp_current.size(); ++t) {
        kl_sum += tr.logp_current[t] - tr.logp_ref[t];
        ++kl_count;
      }
    }
  }
  report.mean_kl = kl_count == 0 ? 0.0 : kl_sum / static_cast<double>(kl_count);

  std::vector<double> new_params = old_params;
  for (std::size_t d = 0; d < new_params.size(); ++d)
    new_params[d] += cfg.learning_rate * eval.gradient[d];
  policy.set_params(new_params);

  if (!options.eval_contexts.empty()) {
    double eval_sum = 0.0;
    std::size_t eval_count = 0;
    for (std::size_t m = 0; m < options.eval_contexts.size(); ++m) {
      const ContextRecord& record = options.eval_contexts[m];
      const PrincipleSet* principles =
          record.principles ? &*record.principles : nullptr;
      for (std::size_t i = 0; i < g; ++i) {
        std::uint64_t seed = derive_seed(options.eval_seed, {m, i});
        GeneratedSample sample = policy.generate(record.context, seed);
        double reward;
        try {
          reward = reward_fn(sample.sample_id, record.context, principles);
        } catch (...) {
          reward = options.floor_reward;
        }
        if (!std::isfinite(reward)) reward = options.floor_reward;
        eval_sum += reward;
        ++eval_count;
      }
    }
    report.eval_reward = eval_sum / static_cast<double>(eval_count);
  }
  return report;
}

}  // namespace prefforge
