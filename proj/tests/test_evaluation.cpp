#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "prefforge/errors.hpp"
#include "prefforge/evaluation.hpp"
#include "prefforge/util.hpp"

using namespace prefforge;
using prefforge::testing::error_code_of;
using prefforge::testing::TempDir;

namespace {

PreferencePair scored_pair(const std::string& left, const std::string& right,
                           PreferenceLabel label) {
  EditContext ctx{"a street at night", "add rain"};
  PreferencePair pair;
  pair.context = ctx;
  pair.winner.context = ctx;
  pair.winner.edited_sample = left;
  pair.loser.context = ctx;
  pair.loser.edited_sample = right;
  pair.label = label;
  return pair;
}

ScoreFn map_scorer(std::map<std::string, double> table) {
  return [table = std::move(table)](const Quadruple& q) {
    return table.at(q.edited_sample);
  };
}

}  // namespace

TEST_CASE("pairwise_accuracy scores labeled pairs and excludes Same") {
  std::vector<PreferencePair> pairs{
      scored_pair("a", "b", PreferenceLabel::WinnerLeft),   // a=3 > b=1: hit
      scored_pair("c", "d", PreferenceLabel::WinnerRight),  // d=2 > c=5? no
      scored_pair("e", "f", PreferenceLabel::Same),         // excluded
      scored_pair("g", "h", PreferenceLabel::WinnerLeft),   // g=4 > h=2: hit
  };
  ScoreFn scorer = map_scorer({{"a", 3}, {"b", 1}, {"c", 5}, {"d", 2},
                               {"e", 0}, {"f", 0}, {"g", 4}, {"h", 2}});
  AccuracyReport report = pairwise_accuracy(pairs, scorer);
  CHECK(report.evaluated == 3);
  CHECK(report.excluded == 1);
  CHECK(report.accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("WinnerRight pairs prefer the right-hand quadruple") {
  std::vector<PreferencePair> pairs{
      scored_pair("low", "high", PreferenceLabel::WinnerRight)};
  ScoreFn scorer = map_scorer({{"low", 1}, {"high", 9}});
  CHECK(pairwise_accuracy(pairs, scorer).accuracy == 1.0);
  // The same scores with the opposite label miss.
  pairs[0].label = PreferenceLabel::WinnerLeft;
  CHECK(pairwise_accuracy(pairs, scorer).accuracy == 0.0);
}

TEST_CASE("score ties count as misses unless half credit is requested") {
  std::vector<PreferencePair> pairs{
      scored_pair("a", "b", PreferenceLabel::WinnerLeft),
      scored_pair("c", "d", PreferenceLabel::WinnerLeft),
  };
  ScoreFn scorer = map_scorer({{"a", 5}, {"b", 5}, {"c", 7}, {"d", 2}});
  CHECK(pairwise_accuracy(pairs, scorer, false).accuracy ==
        doctest::Approx(0.5));
  CHECK(pairwise_accuracy(pairs, scorer, true).accuracy ==
        doctest::Approx(0.75));
}

TEST_CASE("pairwise_accuracy failure modes") {
  ScoreFn scorer = map_scorer({{"a", 1}, {"b", 2}});
  CHECK(error_code_of([&] {
          std::vector<PreferencePair> same_only{
              scored_pair("a", "b", PreferenceLabel::Same)};
          pairwise_accuracy(same_only, scorer);
        }) == Errc::empty_after_exclusion);
  CHECK(error_code_of([&] {
          pairwise_accuracy(std::vector<PreferencePair>{}, scorer);
        }) == Errc::empty_after_exclusion);
  CHECK(error_code_of([&] {
          std::vector<PreferencePair> pairs{
              scored_pair("a", "b", PreferenceLabel::WinnerLeft)};
          pairwise_accuracy(pairs, ScoreFn{});
        }) == Errc::invariant_violation);
  CHECK(error_code_of([&] {
          std::vector<PreferencePair> pairs{
              scored_pair("a", "b", PreferenceLabel::WinnerLeft)};
          pairwise_accuracy(pairs, [](const Quadruple&) {
            return std::numeric_limits<double>::quiet_NaN();
          });
        }) == Errc::non_finite_score);
}

TEST_CASE("accuracy is invariant under strictly increasing transforms") {
  // Accuracy only reads the order of scores, so any strictly increasing
  // re-calibration of the scorer must leave it untouched.
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> score(0.0, 10.0);
  std::uniform_int_distribution<int> label(0, 2);

  std::map<std::string, double> table;
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 60; ++i) {
    std::string l = "l" + std::to_string(i);
    std::string r = "r" + std::to_string(i);
    table[l] = i % 5 == 0 ? 5.0 : score(rng);  // inject exact ties too
    table[r] = i % 5 == 0 ? 5.0 : score(rng);
    auto lab = static_cast<PreferenceLabel>(label(rng));
    pairs.push_back(scored_pair(l, r, lab));
  }
  ScoreFn base = map_scorer(table);
  AccuracyReport strict = pairwise_accuracy(pairs, base, false);
  AccuracyReport half = pairwise_accuracy(pairs, base, true);

  std::uniform_real_distribution<double> coef(0.1, 3.0);
  for (int t = 0; t < 20; ++t) {
    double a = coef(rng), b = coef(rng), c = coef(rng) - 1.5;
    ScoreFn warped;
    switch (t % 3) {
      case 0:
        warped = [=](const Quadruple& q) {
          double s = base(q);
          return a * s + b * s * s * s + c;
        };
        break;
      case 1:
        warped = [=](const Quadruple& q) { return c + a * std::atan(base(q)); };
        break;
      default:
        warped = [=](const Quadruple& q) { return std::exp(b * base(q)); };
        break;
    }
    AccuracyReport w_strict = pairwise_accuracy(pairs, warped, false);
    AccuracyReport w_half = pairwise_accuracy(pairs, warped, true);
    REQUIRE(w_strict == strict);
    REQUIRE(w_half == half);
  }
}

TEST_CASE("best_of_n_score aggregates repeated draws") {
  Quadruple quad;
  quad.edited_sample = "x";
  auto sequence_scorer = [](std::vector<double> values) {
    auto next = std::make_shared<std::size_t>(0);
    return [values = std::move(values), next](const Quadruple&) {
      return values[(*next)++ % values.size()];
    };
  };

  CHECK(best_of_n_score(quad, sequence_scorer({3, 1, 2}), 3, Aggregate::mean) ==
        doctest::Approx(2.0));
  CHECK(best_of_n_score(quad, sequence_scorer({3, 1, 2}), 3,
                        Aggregate::median) == doctest::Approx(2.0));
  // Even counts take the midpoint of the two central order statistics.
  CHECK(best_of_n_score(quad, sequence_scorer({4, 1, 3, 2}), 4,
                        Aggregate::median) == doctest::Approx(2.5));
  CHECK(best_of_n_score(quad, sequence_scorer({7}), 1, Aggregate::median) ==
        doctest::Approx(7.0));

  CHECK(error_code_of([&] {
          best_of_n_score(quad, sequence_scorer({1}), 0, Aggregate::mean);
        }) == Errc::invariant_violation);
  CHECK(error_code_of([&] {
          best_of_n_score(quad, ScoreFn{}, 2, Aggregate::mean);
        }) == Errc::invariant_violation);
  CHECK(error_code_of([&] {
          best_of_n_score(
              quad,
              [](const Quadruple&) {
                return std::numeric_limits<double>::infinity();
              },
              2, Aggregate::mean);
        }) == Errc::non_finite_score);
}

TEST_CASE("weighted_advantage divides by trace length") {
  std::vector<double> adv{1.0, 2.0};
  std::vector<std::int64_t> len{1, 4};
  CHECK(weighted_advantage(adv, len) == doctest::Approx(0.75));

  CHECK(error_code_of([&] {
          std::vector<std::int64_t> short_len{1};
          weighted_advantage(adv, short_len);
        }) == Errc::shape_mismatch);
  CHECK(error_code_of([] {
          weighted_advantage(std::vector<double>{},
                             std::vector<std::int64_t>{});
        }) == Errc::empty_group);
  CHECK(error_code_of([&] {
          std::vector<std::int64_t> zero{1, 0};
          weighted_advantage(adv, zero);
        }) == Errc::zero_length_trace);
  CHECK(error_code_of([&] {
          std::vector<std::int64_t> negative{-3, 4};
          weighted_advantage(adv, negative);
        }) == Errc::zero_length_trace);
  CHECK(error_code_of([&] {
          std::vector<double> bad{std::nan(""), 2.0};
          weighted_advantage(bad, len);
        }) == Errc::non_finite_score);
}

TEST_CASE("metrics_series reads, deduplicates and sorts run metrics") {
  TempDir tmp;
  write_file(tmp.file("metrics.jsonl"),
             "{\"step\": 20, \"eval_reward\": 2.0}\n"
             "{\"step\": 0, \"train_reward\": 1.5, \"accuracy\": 0.5}\n"
             "\n"
             "{\"step\": 20, \"eval_reward\": 3.5, \"train_reward\": null}\n");
  std::vector<MetricsRow> rows = metrics_series(tmp.path().string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].step == 0);
  CHECK(rows[0].train_reward == 1.5);
  CHECK(rows[0].accuracy == 0.5);
  CHECK_FALSE(rows[0].eval_reward.has_value());
  // The duplicate step keeps the later write only.
  CHECK(rows[1].step == 20);
  CHECK(rows[1].eval_reward == 3.5);
  CHECK_FALSE(rows[1].train_reward.has_value());
  CHECK_FALSE(rows[1].weighted_advantage.has_value());
}

TEST_CASE("metrics_series failure modes") {
  TempDir tmp;
  CHECK(error_code_of([&] {
          metrics_series(tmp.file("does-not-exist"));
        }) == Errc::missing_run);
  CHECK(error_code_of([&] {
          metrics_series(tmp.path().string());  // dir exists, no metrics file
        }) == Errc::missing_run);
  write_file(tmp.file("metrics.jsonl"), "\n\n");
  CHECK(error_code_of([&] { metrics_series(tmp.path().string()); }) ==
        Errc::missing_run);
  write_file(tmp.file("metrics.jsonl"), "{\"step\": 1}\n{oops\n");
  CHECK(error_code_of([&] { metrics_series(tmp.path().string()); }) ==
        Errc::parse_error);
  write_file(tmp.file("metrics.jsonl"), "{\"train_reward\": 1.0}\n");
  CHECK(error_code_of([&] { metrics_series(tmp.path().string()); }) ==
        Errc::parse_error);
}

TEST_CASE("metrics_csv renders absent cells as empty") {
  std::vector<MetricsRow> rows(2);
  rows[0].step = 0;
  rows[0].train_reward = 1.5;
  rows[0].accuracy = 0.5;
  rows[1].step = 10;
  rows[1].eval_reward = 2.0;
  CHECK(metrics_csv(rows) ==
        "step,train_reward,eval_reward,weighted_advantage,accuracy\n"
        "0,1.5,,,0.5\n"
        "10,,2,,\n");
  CHECK(metrics_csv(std::vector<MetricsRow>{}) ==
        "step,train_reward,eval_reward,weighted_advantage,accuracy\n");
}
