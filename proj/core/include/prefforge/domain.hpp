#ifndef PREFFORGE_DOMAIN_HPP_
#define PREFFORGE_DOMAIN_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prefforge {

// Samples (images in the original setting) are opaque string ids; nothing in
// the engine ever looks inside them.

enum class PrincipleCategory { Keep, Follow, Quality };

std::string_view category_name(PrincipleCategory c) noexcept;
// Accepts the short names and the long-form labels
// ("Feature Preservation" -> Keep, "Instruction Following" -> Follow,
// "Image Quality" -> Quality).
PrincipleCategory category_from_name(std::string_view name);

/// One verifiable yes/no criterion decomposed from an edit instruction.
struct Principle {
  std::string id;
  std::string text;
  PrincipleCategory category = PrincipleCategory::Follow;

  bool operator==(const Principle&) const = default;
};

/// Ordered set of principles for one context. Ordering is significant:
/// verdict lists align by index.
struct PrincipleSet {
  std::vector<Principle> principles;
  std::string context_id;

  std::size_t size() const noexcept { return principles.size(); }
  bool operator==(const PrincipleSet&) const = default;
};

/// A (reference sample, instruction) conditioning context.
struct EditContext {
  std::string reference_sample;
  std::string instruction;

  bool operator==(const EditContext&) const = default;
};

// Stable content key for a context; PrincipleSet::context_id stores this.
std::string context_key(const EditContext& ctx);

/// The unit the reward model scores: edited sample + its context + the
/// decomposed principles.
struct Quadruple {
  std::string edited_sample;
  EditContext context;
  PrincipleSet principles;

  bool operator==(const Quadruple&) const = default;
};

std::string quadruple_key(const Quadruple& quad);

struct PrincipleVerdict {
  std::string principle_id;
  int met = 0;  // strictly 0 or 1
  std::string reason;

  bool operator==(const PrincipleVerdict&) const = default;
};

/// A scored reasoning trace: the "action" of the scoring policy. Token
/// records exist for traces produced by a policy; traces parsed from plain
/// text carry placeholder tokens whose count approximates the text length.
struct ReasoningTrace {
  std::string think_text;
  std::vector<PrincipleVerdict> verdicts;
  double average_score = 0.0;  // in [0,1]; == (sum met)/K when verdicts complete
  double final_score = 0.0;    // in [0,10]
  std::vector<int> token_ids;
  std::vector<double> token_logprobs_current;
  std::vector<double> token_logprobs_old;

  std::size_t length() const noexcept { return token_ids.size(); }
  bool operator==(const ReasoningTrace&) const = default;
};

enum class PreferenceLabel { WinnerLeft, WinnerRight, Same };

std::string_view label_name(PreferenceLabel label) noexcept;
PreferenceLabel label_from_name(std::string_view name);

/// Human preference pair. For Same-labeled pairs winner/loser carry no
/// ordering semantics (they are just the two sides as stored).
struct PreferencePair {
  EditContext context;
  Quadruple winner;
  Quadruple loser;
  PreferenceLabel label = PreferenceLabel::WinnerLeft;

  bool operator==(const PreferencePair&) const = default;
};

/// N (or G) rollouts for one sample with their per-trace statistics. The
/// score/reward/advantage lists are filled in stages; populated lists always
/// have the same length as `traces`.
struct RolloutGroup {
  Quadruple sample;
  std::vector<ReasoningTrace> traces;
  std::vector<double> scores;
  std::vector<double> rewards;
  std::vector<double> advantages;

  bool operator==(const RolloutGroup&) const = default;
};

struct OptimizerConfig {
  int group_size = 24;         // N for GCPO, G for GRPO
  double clip_epsilon = 0.2;   // surrogate clip width
  double kl_beta = 0.04;       // KL penalty weight (GRPO only)
  double std_epsilon = 1e-8;   // stabilizer in the group normalization
  double learning_rate = 0.1;
  std::int64_t seed = 0;

  bool operator==(const OptimizerConfig&) const = default;
};

// Validation. Each checks the type's invariants (including finiteness of
// every numeric field) and throws Error{Errc::invariant_violation} naming
// the failing field.
void validate(const Principle& p);
void validate(const PrincipleSet& set);
void validate(const EditContext& ctx);
void validate(const Quadruple& quad);
void validate(const PrincipleVerdict& verdict);
void validate(const ReasoningTrace& trace);
void validate(const PreferencePair& pair);
void validate(const RolloutGroup& group);
void validate(const OptimizerConfig& cfg);

/// Returns `quad` unchanged when every invariant holds.
Quadruple validate_quadruple(const Quadruple& quad);

// Context record consumed by the GRPO and pipeline CLIs: a context plus the
// pre-existing candidate edited samples and (optionally) its principles.
struct ContextRecord {
  EditContext context;
  std::vector<std::string> candidates;
  std::optional<PrincipleSet> principles;

  bool operator==(const ContextRecord&) const = default;
};

}  // namespace prefforge

#endif  // PREFFORGE_DOMAIN_HPP_
