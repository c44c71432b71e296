#ifndef PREFFORGE_EVALUATION_HPP_
#define PREFFORGE_EVALUATION_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefforge/domain.hpp"

namespace prefforge {

using ScoreFn = std::function<double(const Quadruple&)>;

struct AccuracyReport {
  double accuracy = 0.0;
  int evaluated = 0;
  int excluded = 0;

  bool operator==(const AccuracyReport&) const = default;
};

/// Pairwise preference accuracy with tie exclusion: Same-labeled pairs leave
/// the denominator; a labeled pair counts correct iff
/// score(winner) > score(loser). Equal model scores count incorrect unless
/// `half_credit_ties` is set, in which case they count 0.5.
/// Throws Error{empty_after_exclusion} when no labeled pairs remain.
AccuracyReport pairwise_accuracy(std::span<const PreferencePair> pairs,
                                 const ScoreFn& score_fn,
                                 bool half_credit_ties = false);

enum class Aggregate { mean, median };

/// Samples score_fn n times and aggregates. The median of an even count is
/// the midpoint of the two central order statistics.
double best_of_n_score(const Quadruple& quad, const ScoreFn& score_fn, int n,
                       Aggregate aggregate);

/// (1/G) sum_i advantages[i] / lengths[i]. Throws Error{zero_length_trace}
/// on a nonpositive length and Error{shape_mismatch} on unequal sizes.
double weighted_advantage(std::span<const double> advantages,
                          std::span<const std::int64_t> lengths);

/// One aligned row of a training run's metric series. Absent fields were not
/// reported at that step.
struct MetricsRow {
  std::int64_t step = 0;
  std::optional<double> train_reward;
  std::optional<double> eval_reward;
  std::optional<double> weighted_advantage;
  std::optional<double> accuracy;
};

/// Loads `<run_dir>/metrics.jsonl`, deduplicates steps (last write wins) and
/// returns rows sorted by step. Throws Error{missing_run} when the run
/// directory or its metrics file is missing or empty.
std::vector<MetricsRow> metrics_series(const std::string& run_dir);

/// CSV rendering of a metric series: header
/// "step,train_reward,eval_reward,weighted_advantage,accuracy", empty cells
/// for absent values.
std::string metrics_csv(std::span<const MetricsRow> rows);

}  // namespace prefforge

#endif  // PREFFORGE_EVALUATION_HPP_
