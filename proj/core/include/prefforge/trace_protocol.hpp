#ifndef PREFFORGE_TRACE_PROTOCOL_HPP_
#define PREFFORGE_TRACE_PROTOCOL_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "prefforge/domain.hpp"

namespace prefforge {

// The Think+Score wire format. A well-formed trace text is
//
//   <free-form reasoning text>
//   [{"question": "...", "score": 1}, ...], {"average_score": 0.8} <score>7</score>
//
// i.e. a JSON array of per-principle verdicts, an average-score object, and
// a terminal score tag. Parsing is tolerant of surrounding prose; emission
// is byte-exact and covered by golden tests.

struct RawTraceText {
  std::string text;
};

struct ScoreExtraction {
  double value = 0.0;  // clamped to [0,10]
  bool clamped = false;
};

/// Extracts the numeric content of the last well-formed score tag. Both
/// closing forms "</score>" and "<\score>" are accepted; only the standard
/// form is ever emitted. Out-of-range values are clamped and flagged.
/// Throws Error{score_missing} when no complete tag exists and
/// Error{score_unparseable} when the last tag's content is not a number.
ScoreExtraction extract_score(const RawTraceText& raw);

/// Parses the per-principle verdict array and aligns it to `principles` by
/// question text: exact match first, then whitespace/case-normalized match.
/// Each entry may be consumed at most once. Scores must be exactly 0 or 1.
/// Throws Error{verdict_missing} naming the first unmatched principle id and
/// Error{verdict_non_binary} on a fractional score.
std::vector<PrincipleVerdict> parse_verdicts(const RawTraceText& raw,
                                             const PrincipleSet& principles);

/// Renders a trace in the canonical wire format. Emitted text re-parses to
/// identical verdicts and final score. Principle texts for the question
/// fields are taken from `principles` (aligned by verdict index order when
/// ids match, falling back to id lookup).
RawTraceText emit_trace(const ReasoningTrace& trace,
                        const PrincipleSet& principles);

struct ParsedTrace {
  std::string think_text;
  std::vector<PrincipleVerdict> verdicts;
  double average_score = 0.0;  // (sum met)/K, computed from the verdicts
  double final_score = 0.0;
  bool clamped = false;
};

/// Convenience: verdicts + score in one pass. think_text is the prose before
/// the verdict array.
ParsedTrace parse_trace(const RawTraceText& raw, const PrincipleSet& principles);

/// Builds a full ReasoningTrace from parsed text. Token records are
/// placeholders (whitespace token count of the text, log-probability zero)
/// since the text did not come from an instrumented policy.
ReasoningTrace trace_from_text(const RawTraceText& raw,
                               const PrincipleSet& principles);

/// Total score extraction for RL loops: malformed text yields `floor`
/// instead of an error so group statistics stay defined.
double score_or_floor(const RawTraceText& raw, double floor = 0.0) noexcept;

/// Whitespace-delimited token count, minimum 1. Used for the length of
/// traces that were parsed from plain text.
std::size_t approximate_token_count(std::string_view text) noexcept;

}  // namespace prefforge

#endif  // PREFFORGE_TRACE_PROTOCOL_HPP_
