#include "prefforge/domain.hpp"

#include <cmath>
#include <set>

#include "prefforge/errors.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw Error(Errc::invariant_violation, field + ": " + what);
}

void require_finite(double v, const std::string& field) {
  require(std::isfinite(v), field, "must be finite");
}

}  // namespace

std::string_view category_name(PrincipleCategory c) noexcept {
  switch (c) {
    case PrincipleCategory::Keep: return "Keep";
    case PrincipleCategory::Follow: return "Follow";
    case PrincipleCategory::Quality: return "Quality";
  }
  return "?";
}

PrincipleCategory category_from_name(std::string_view name) {
  std::string n = normalize_text(name);
  if (n == "keep" || n == "feature preservation") return PrincipleCategory::Keep;
  if (n == "follow" || n == "instruction following")
    return PrincipleCategory::Follow;
  if (n == "quality" || n == "image quality") return PrincipleCategory::Quality;
  throw Error(Errc::parse_error, "unknown principle category: " + std::string(name));
}

std::string context_key(const EditContext& ctx) {
  std::string material = "ctx\x1f" + ctx.reference_sample + "\x1f" + ctx.instruction;
  return "c" + to_hex(fnv1a64(material));
}

std::string quadruple_key(const Quadruple& quad) {
  std::string material = "quad\x1f" + quad.edited_sample + "\x1f" +
                         context_key(quad.context);
  return "q" + to_hex(fnv1a64(material));
}

std::string_view label_name(PreferenceLabel label) noexcept {
  switch (label) {
    case PreferenceLabel::WinnerLeft: return "winner_left";
    case PreferenceLabel::WinnerRight: return "winner_right";
    case PreferenceLabel::Same: return "same";
  }
  return "?";
}

PreferenceLabel label_from_name(std::string_view name) {
  std::string n = normalize_text(name);
  if (n == "winner_left" || n == "left") return PreferenceLabel::WinnerLeft;
  if (n == "winner_right" || n == "right") return PreferenceLabel::WinnerRight;
  if (n == "same" || n == "tie") return PreferenceLabel::Same;
  throw Error(Errc::parse_error, "unknown preference label: " + std::string(name));
}

void validate(const Principle& p) {
  require(!p.id.empty(), "Principle.id", "must be nonempty");
  require(!p.text.empty(), "Principle.text", "must be nonempty");
}

void validate(const PrincipleSet& set) {
  require(!set.principles.empty(), "PrincipleSet.principles", "must be nonempty");
  std::set<std::string> ids;
  for (const auto& p : set.principles) {
    validate(p);
    require(ids.insert(p.id).second, "PrincipleSet.principles",
            "duplicate principle id " + p.id);
  }
}

void validate(const EditContext& ctx) {
  require(!ctx.reference_sample.empty(), "EditContext.reference_sample",
          "must be nonempty");
  require(!ctx.instruction.empty(), "EditContext.instruction", "must be nonempty");
}

void validate(const Quadruple& quad) {
  require(!quad.edited_sample.empty(), "Quadruple.edited_sample",
          "must be nonempty");
  validate(quad.context);
  validate(quad.principles);
  require(quad.principles.context_id == context_key(quad.context),
          "Quadruple.principles.context_id",
          "must match the context key " + context_key(quad.context));
}

void validate(const PrincipleVerdict& verdict) {
  require(!verdict.principle_id.empty(), "PrincipleVerdict.principle_id",
          "must be nonempty");
  require(verdict.met == 0 || verdict.met == 1, "PrincipleVerdict.met",
          "must be 0 or 1");
}

void validate(const ReasoningTrace& trace) {
  for (const auto& v : trace.verdicts) validate(v);
  require_finite(trace.average_score, "ReasoningTrace.average_score");
  require(trace.average_score >= 0.0 && trace.average_score <= 1.0,
          "ReasoningTrace.average_score", "must lie in [0,1]");
  if (!trace.verdicts.empty()) {
    double met = 0.0;
    for (const auto& v : trace.verdicts) met += v.met;
    double expected = met / static_cast<double>(trace.verdicts.size());
    require(std::abs(trace.average_score - expected) <= 1e-9,
            "ReasoningTrace.average_score",
            "must equal (sum met)/K = " + format_double(expected));
  }
  require_finite(trace.final_score, "ReasoningTrace.final_score");
  require(trace.final_score >= 0.0 && trace.final_score <= 10.0,
          "ReasoningTrace.final_score", "must lie in [0,10]");
  require(!trace.token_ids.empty(), "ReasoningTrace.token_ids",
          "must be nonempty");
  require(trace.token_logprobs_current.size() == trace.token_ids.size(),
          "ReasoningTrace.token_logprobs_current",
          "must match token_ids length");
  require(trace.token_logprobs_old.size() == trace.token_ids.size(),
          "ReasoningTrace.token_logprobs_old", "must match token_ids length");
  for (double lp : trace.token_logprobs_current) {
    require_finite(lp, "ReasoningTrace.token_logprobs_current");
    require(lp <= 0.0, "ReasoningTrace.token_logprobs_current",
            "log-probabilities must be <= 0");
  }
  for (double lp : trace.token_logprobs_old) {
    require_finite(lp, "ReasoningTrace.token_logprobs_old");
    require(lp <= 0.0, "ReasoningTrace.token_logprobs_old",
            "log-probabilities must be <= 0");
  }
}

void validate(const PreferencePair& pair) {
  validate(pair.context);
  validate(pair.winner);
  validate(pair.loser);
  require(pair.winner.context == pair.context, "PreferencePair.winner",
          "context must match the pair context");
  require(pair.loser.context == pair.context, "PreferencePair.loser",
          "context must match the pair context");
  require(pair.winner.edited_sample != pair.loser.edited_sample,
          "PreferencePair.loser", "sides must be distinct samples");
}

void validate(const RolloutGroup& group) {
  validate(group.sample);
  require(!group.traces.empty(), "RolloutGroup.traces", "must be nonempty");
  for (const auto& t : group.traces) validate(t);
  auto check_list = [&](const std::vector<double>& xs, const char* field) {
    if (xs.empty()) return;
    require(xs.size() == group.traces.size(), std::string("RolloutGroup.") + field,
            "must match traces length when populated");
    for (double x : xs) require_finite(x, std::string("RolloutGroup.") + field);
  };
  check_list(group.scores, "scores");
  check_list(group.rewards, "rewards");
  check_list(group.advantages, "advantages");
}

void validate(const OptimizerConfig& cfg) {
  require(cfg.group_size >= 2, "OptimizerConfig.group_size", "must be >= 2");
  require_finite(cfg.clip_epsilon, "OptimizerConfig.clip_epsilon");
  require(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0,
          "OptimizerConfig.clip_epsilon", "must lie in (0,1)");
  require_finite(cfg.kl_beta, "OptimizerConfig.kl_beta");
  require(cfg.kl_beta >= 0.0, "OptimizerConfig.kl_beta", "must be >= 0");
  require_finite(cfg.std_epsilon, "OptimizerConfig.std_epsilon");
  require(cfg.std_epsilon > 0.0, "OptimizerConfig.std_epsilon", "must be > 0");
  require_finite(cfg.learning_rate, "OptimizerConfig.learning_rate");
  require(cfg.learning_rate > 0.0, "OptimizerConfig.learning_rate",
          "must be > 0");
}

Quadruple validate_quadruple(const Quadruple& quad) {
  validate(quad);
  return quad;
}

}  // namespace prefforge
