#ifndef PREFFORGE_TOYLAB_HPP_
#define PREFFORGE_TOYLAB_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "prefforge/domain.hpp"
#include "prefforge/evaluation.hpp"
#include "prefforge/gcpo.hpp"
#include "prefforge/pipeline.hpp"
#include "prefforge/policy.hpp"

namespace prefforge {

// Synthetic stand-ins with known ground truth. Samples carry a hidden latent
// quality; preferences, stub scorer outputs, and gold verdicts all derive
// from it, so every optimization result can be checked against the latent.

struct SyntheticWorld {
  std::map<std::string, double> latent_quality;  // sample id -> [0,10]
  double noise_sigma = 0.0;   // scorer observation noise
  double same_margin = 0.5;   // |quality difference| below this labels Same
  std::uint64_t seed = 0;
  std::vector<ContextRecord> contexts;  // candidates index into latent_quality
};

struct WorldParams {
  int samples = 200;
  int candidates_per_context = 4;
  double noise_sigma = 0.0;
  double same_margin = 0.5;
  std::uint64_t seed = 0;
};

SyntheticWorld make_world(const WorldParams& params);

/// Preference label for two samples of one context: winner is the higher
/// latent quality; Same when the difference is inside the margin.
PreferenceLabel world_label(const SyntheticWorld& world,
                            const std::string& left,
                            const std::string& right);

/// Draws `count` preference pairs (contexts and candidate pairs chosen with
/// the given seed). Quadruples embed principles from the stub judge. Pairs
/// falling inside the Same margin keep the Same label.
std::vector<PreferencePair> make_pairs(const SyntheticWorld& world, int count,
                                       std::uint64_t seed);

std::string encode_world(const SyntheticWorld& world);
SyntheticWorld decode_world(std::string_view text);

/// Noiseless ground-truth scorer: the edited sample's latent quality.
ScoreFn oracle_score_fn(const SyntheticWorld& world);

using FeatureFn = std::function<std::vector<double>(const std::string& sample_id)>;

/// Observation vector the toy scoring policy conditions on: a quality
/// coordinate plus hash-derived distractor coordinates and a bias term.
FeatureFn world_feature_fn(const SyntheticWorld& world);
constexpr int kWorldFeatureDim = 5;

struct ToyPolicyOptions {
  double temperature = 1.0;  // 0 selects greedily
  int think_min = 2;         // filler tokens before the score token
  int think_max = 6;
  std::uint64_t init_seed = 1;
  double init_scale = 0.1;   // stddev of the random initial parameters
};

/// Scoring-policy stand-in. Emits a fixed trace skeleton (filler tokens,
/// probability one) followed by one learned score token in 0..10, so the
/// whole gradient flows through a single softmax decision per trace.
class ToyScoringPolicy final : public ScoringPolicy {
 public:
  static constexpr int kScoreLevels = 11;  // score tokens 0..10
  static constexpr int kFillerToken = 11;
  static constexpr int kVocabSize = 12;

  ToyScoringPolicy(FeatureFn features, int feature_dim,
                   ToyPolicyOptions options = {});

  std::size_t param_count() const override;
  std::vector<double> params() const override;
  void set_params(std::span<const double> values) override;

  ReasoningTrace sample_trace(const Quadruple& quad,
                              std::uint64_t seed) const override;
  std::vector<double> token_logprobs(const Quadruple& quad,
                                     const ReasoningTrace& trace,
                                     std::span<const double> params) const override;
  std::vector<double> weighted_logprob_grad(
      const Quadruple& quad, const ReasoningTrace& trace,
      std::span<const double> weights,
      std::span<const double> params) const override;

  /// Distribution over the score levels 0..10 at the current parameters.
  std::vector<double> score_distribution(const Quadruple& quad) const;
  /// sum_v v * p(v | quad); the deterministic point score used for
  /// evaluation.
  double expected_score(const Quadruple& quad) const;

  /// Distribution over the full vocabulary at trace position `t` (one-hot
  /// for skeleton positions, the score softmax at the final position).
  std::vector<double> position_distribution(const Quadruple& quad,
                                            const ReasoningTrace& trace,
                                            std::size_t t) const;

  const ToyPolicyOptions& options() const { return options_; }
  int feature_dim() const { return feature_dim_; }

 private:
  std::vector<double> score_logits(const Quadruple& quad,
                                   std::span<const double> params) const;

  FeatureFn features_;
  int feature_dim_;
  ToyPolicyOptions options_;
  std::vector<double> weights_;  // kScoreLevels x feature_dim, row-major
};

/// n seeded rollouts; each trace's emitted text ends in a parsable score
/// tag.
std::vector<ReasoningTrace> toy_rollout(const ToyScoringPolicy& policy,
                                        const Quadruple& quad, int n,
                                        std::uint64_t seed);

struct ToyTokenOptions {
  double temperature = 1.0;
  int sequence_length = 1;
  std::uint64_t init_seed = 1;
  double init_scale = 0.0;  // zero starts uniform
};

/// Generation-policy stand-in: an autoregressive sampler over a small token
/// vocabulary with one logit row per context (row 0 when context-free).
/// Tokens name opaque samples; with candidate lists attached, token k maps
/// to the context's k-th candidate sample.
class ToyTokenPolicy final : public GenerationPolicy {
 public:
  ToyTokenPolicy(int vocab_size, ToyTokenOptions options = {});

  /// Contextual variant: one row per context record, vocabulary sized to the
  /// largest candidate list, tokens mapped onto candidate sample ids.
  static ToyTokenPolicy for_candidates(std::span<const ContextRecord> contexts,
                                       ToyTokenOptions options = {});

  std::size_t param_count() const override;
  std::vector<double> params() const override;
  void set_params(std::span<const double> values) override;

  GeneratedSample generate(const EditContext& ctx,
                           std::uint64_t seed) const override;
  std::vector<double> step_logprobs(const EditContext& ctx,
                                    const GeneratedSample& sample,
                                    std::span<const double> params) const override;
  std::vector<double> weighted_logprob_grad(
      const EditContext& ctx, const GeneratedSample& sample,
      std::span<const double> weights,
      std::span<const double> params) const override;

  /// Probability of `token` in the given context's row under the current
  /// parameters.
  double token_probability(const EditContext& ctx, int token) const;
  int vocab_size() const { return vocab_size_; }

 private:
  int row_of(const EditContext& ctx) const;
  std::vector<double> row_distribution(int row,
                                       std::span<const double> params) const;

  int vocab_size_;
  int rows_ = 1;
  ToyTokenOptions options_;
  std::vector<double> logits_;  // rows x vocab, row-major
  std::map<std::string, int> context_rows_;
  std::vector<std::vector<std::string>> candidate_ids_;  // per row; may be empty
};

/// Reference oracle for the win/loss ratio rewards: the definition as a
/// naive double loop. Identical contract to win_loss_ratios.
WinLossRatios brute_force_ratios(std::span<const double> winner_scores,
                                 std::span<const double> loser_scores,
                                 double tie_delta = 0.0);

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
std::vector<double> finite_difference_grad(
    const std::function<double(std::span<const double>)>& objective,
    std::span<const double> theta, double h);

/// Deterministic judge backed by the synthetic world: fixed-size principle
/// decompositions and gold verdicts derived from the latent quality.
class StubJudge final : public JudgeClient {
 public:
  explicit StubJudge(SyntheticWorld world) : world_(std::move(world)) {}

  PrincipleSet decompose(const EditContext& ctx) override;
  std::vector<PrincipleVerdict> verify(const Quadruple& quad,
                                       const ReasoningTrace& reference) override;

 private:
  SyntheticWorld world_;
};

/// Deterministic scorer: emits protocol-formatted trace text whose score is
/// the latent quality plus seeded noise (world noise plus a temperature
/// term).
class StubScorer final : public ScorerClient {
 public:
  StubScorer(SyntheticWorld world, std::string id, std::uint64_t seed = 0)
      : world_(std::move(world)), id_(std::move(id)), seed_(seed) {}

  std::string id() const override { return id_; }
  RawTraceText score(const Quadruple& quad,
                     const SamplingParams& params) override;

 private:
  SyntheticWorld world_;
  std::string id_;
  std::uint64_t seed_;
};

/// Hard-case stand-in: an instruction is complex when it contains at least
/// two edit verbs.
class VerbCountFilter final : public HardCaseFilter {
 public:
  bool is_complex(const EditContext& ctx) override;
};

// Toy scoring policies round-trip through a self-contained checkpoint file
// (parameters plus the world the feature function reads).
void save_policy_checkpoint(const std::string& path,
                            const ToyScoringPolicy& policy,
                            const SyntheticWorld& world);

struct LoadedPolicy {
  std::unique_ptr<ToyScoringPolicy> policy;
  SyntheticWorld world;
};

LoadedPolicy load_policy_checkpoint(const std::string& path);

}  // namespace prefforge

#endif  // PREFFORGE_TOYLAB_HPP_
