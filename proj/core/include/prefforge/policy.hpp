#ifndef PREFFORGE_POLICY_HPP_
#define PREFFORGE_POLICY_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefforge/domain.hpp"

namespace prefforge {

/// Abstract differentiable token-sequence generator. Log-probabilities are
/// evaluated at explicit parameter vectors so engines can hold frozen
/// "old" and "reference" snapshots without mutating the policy.
class PolicyModel {
 public:
  virtual ~PolicyModel() = default;

  virtual std::size_t param_count() const = 0;
  virtual std::vector<double> params() const = 0;
  virtual void set_params(std::span<const double> values) = 0;
};

/// Pointwise scoring policy (the reward model in training): samples a
/// reasoning trace for a quadruple.
class ScoringPolicy : public PolicyModel {
 public:
  /// Samples one trace under the current parameters. Both log-probability
  /// tracks of the returned trace hold the sampling-time values; engines
  /// overwrite the "old" track from their own snapshot when needed.
  virtual ReasoningTrace sample_trace(const Quadruple& quad,
                                      std::uint64_t seed) const = 0;

  /// Per-token log-probabilities of `trace` evaluated at `params`.
  virtual std::vector<double> token_logprobs(
      const Quadruple& quad, const ReasoningTrace& trace,
      std::span<const double> params) const = 0;

  /// Gradient with respect to `params` of
  ///   sum_t weights[t] * logprob(token t).
  virtual std::vector<double> weighted_logprob_grad(
      const Quadruple& quad, const ReasoningTrace& trace,
      std::span<const double> weights, std::span<const double> params) const = 0;
};

/// One generated sample: its opaque id plus the action tokens that produced
/// it. The trajectory's per-step log-probabilities are evaluated on demand.
struct GeneratedSample {
  std::string sample_id;
  std::vector<int> tokens;
};

/// Downstream generation policy: produces samples for a context.
class GenerationPolicy : public PolicyModel {
 public:
  virtual GeneratedSample generate(const EditContext& ctx,
                                   std::uint64_t seed) const = 0;

  /// Per-step log-probabilities of the sample's actions at `params`.
  virtual std::vector<double> step_logprobs(
      const EditContext& ctx, const GeneratedSample& sample,
      std::span<const double> params) const = 0;

  /// Gradient with respect to `params` of sum_t weights[t] * logprob(step t).
  virtual std::vector<double> weighted_logprob_grad(
      const EditContext& ctx, const GeneratedSample& sample,
      std::span<const double> weights, std::span<const double> params) const = 0;
};

}  // namespace prefforge

#endif  // PREFFORGE_POLICY_HPP_
