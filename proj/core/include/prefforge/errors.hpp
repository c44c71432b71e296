#ifndef PREFFORGE_ERRORS_HPP_
#define PREFFORGE_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefforge {

enum class Errc {
  invariant_violation,
  score_missing,
  score_unparseable,
  verdict_missing,
  verdict_non_binary,
  group_size_mismatch,
  non_finite_score,
  empty_group,
  shape_mismatch,
  non_positive_ratio,
  empty_batch,
  judge_unavailable,
  empty_decomposition,
  all_candidates_failed,
  length_mismatch,
  filter_unavailable,
  empty_after_exclusion,
  zero_length_trace,
  missing_run,
  config_parse,
  unknown_key,
  parse_error,
  io_error,
  adapter_error,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for all typed failures; `code()` identifies the
/// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace prefforge

#endif  // PREFFORGE_ERRORS_HPP_
