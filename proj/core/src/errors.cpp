#include "prefforge/errors.hpp"

namespace prefforge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invariant_violation: return "invariant_violation";
    case Errc::score_missing: return "score_missing";
    case Errc::score_unparseable: return "score_unparseable";
    case Errc::verdict_missing: return "verdict_missing";
    case Errc::verdict_non_binary: return "verdict_non_binary";
    case Errc::group_size_mismatch: return "group_size_mismatch";
    case Errc::non_finite_score: return "non_finite_score";
    case Errc::empty_group: return "empty_group";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::non_positive_ratio: return "non_positive_ratio";
    case Errc::empty_batch: return "empty_batch";
    case Errc::judge_unavailable: return "judge_unavailable";
    case Errc::empty_decomposition: return "empty_decomposition";
    case Errc::all_candidates_failed: return "all_candidates_failed";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::filter_unavailable: return "filter_unavailable";
    case Errc::empty_after_exclusion: return "empty_after_exclusion";
    case Errc::zero_length_trace: return "zero_length_trace";
    case Errc::missing_run: return "missing_run";
    case Errc::config_parse: return "config_parse";
    case Errc::unknown_key: return "unknown_key";
    case Errc::parse_error: return "parse_error";
    case Errc::io_error: return "io_error";
    case Errc::adapter_error: return "adapter_error";
  }
  return "unknown_error";
}

}  // namespace prefforge
