#include "prefforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "prefforge/errors.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

AccuracyReport pairwise_accuracy(std::span<const PreferencePair> pairs,
                                 const ScoreFn& score_fn,
                                 bool half_credit_ties) {
  if (!score_fn)
    throw Error(Errc::invariant_violation, "score_fn: must be set");
  AccuracyReport report;
  double correct = 0.0;
  for (const PreferencePair& pair : pairs) {
    if (pair.label == PreferenceLabel::Same) {
      ++report.excluded;
      continue;
    }
    const Quadruple& preferred =
        pair.label == PreferenceLabel::WinnerRight ? pair.loser : pair.winner;
    const Quadruple& other =
        pair.label == PreferenceLabel::WinnerRight ? pair.winner : pair.loser;
    double sp = score_fn(preferred);
    double so = score_fn(other);
    if (!std::isfinite(sp) || !std::isfinite(so))
      throw Error(Errc::non_finite_score, "score function returned non-finite");
    ++report.evaluated;
    if (sp > so) {
      correct += 1.0;
    } else if (sp == so && half_credit_ties) {
      correct += 0.5;
    }
  }
  if (report.evaluated == 0)
    throw Error(Errc::empty_after_exclusion,
                "no labeled pairs remain after excluding Same");
  report.accuracy = correct / static_cast<double>(report.evaluated);
  return report;
}

double best_of_n_score(const Quadruple& quad, const ScoreFn& score_fn, int n,
                       Aggregate aggregate) {
  if (!score_fn)
    throw Error(Errc::invariant_violation, "score_fn: must be set");
  if (n < 1) throw Error(Errc::invariant_violation, "n: must be >= 1");
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = score_fn(quad);
    if (!std::isfinite(s))
      throw Error(Errc::non_finite_score, "score function returned non-finite");
    scores.push_back(s);
  }
  if (aggregate == Aggregate::mean) {
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
  }
  std::sort(scores.begin(), scores.end());
  std::size_t mid = scores.size() / 2;
  if (scores.size() % 2 == 1) return scores[mid];
  return 0.5 * (scores[mid - 1] + scores[mid]);
}

double weighted_advantage(std::span<const double> advantages,
                          std::span<const std::int64_t> lengths) {
  if (advantages.size() != lengths.size())
    throw Error(Errc::shape_mismatch,
                "advantages and lengths must have the same size");
  if (advantages.empty())
    throw Error(Errc::empty_group, "no advantages to weight");
  double sum = 0.0;
  for (std::size_t i = 0; i < advantages.size(); ++i) {
    if (lengths[i] <= 0)
      throw Error(Errc::zero_length_trace,
                  "trace " + std::to_string(i) + " has nonpositive length");
    if (!std::isfinite(advantages[i]))
      throw Error(Errc::non_finite_score, "advantage is not finite");
    sum += advantages[i] / static_cast<double>(lengths[i]);
  }
  return sum / static_cast<double>(advantages.size());
}

std::vector<MetricsRow> metrics_series(const std::string& run_dir) {
  namespace fs = std::filesystem;
  fs::path file = fs::path(run_dir) / "metrics.jsonl";
  std::error_code ec;
  if (!fs::exists(run_dir, ec) || !fs::exists(file, ec))
    throw Error(Errc::missing_run,
                "no metrics found under run directory " + run_dir);

  std::string content = read_file(file.string());
  std::map<std::int64_t, MetricsRow> by_step;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::string_view line;
    if (nl == std::string::npos) {
      line = std::string_view(content).substr(pos);
      pos = content.size() + 1;
    } else {
      line = std::string_view(content).substr(pos, nl - pos);
      pos = nl + 1;
    }
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("step"))
      throw Error(Errc::parse_error,
                  run_dir + "/metrics.jsonl:" + std::to_string(line_no) +
                      ": bad metrics line");
    MetricsRow row;
    row.step = j.at("step").get<std::int64_t>();
    auto read_opt = [&](const char* key) -> std::optional<double> {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) return std::nullopt;
      return it->get<double>();
    };
    row.train_reward = read_opt("train_reward");
    row.eval_reward = read_opt("eval_reward");
    row.weighted_advantage = read_opt("weighted_advantage");
    row.accuracy = read_opt("accuracy");
    by_step[row.step] = row;  // duplicate steps: last write wins
  }
  if (by_step.empty())
    throw Error(Errc::missing_run, "metrics file is empty: " + run_dir);
  std::vector<MetricsRow> rows;
  rows.reserve(by_step.size());
  for (auto& [step, row] : by_step) rows.push_back(row);
  return rows;
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = "step,train_reward,eval_reward,weighted_advantage,accuracy\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const MetricsRow& row : rows) {
    out += std::to_string(row.step);
    out += ',';
    out += cell(row.train_reward);
    out += ',';
    out += cell(row.eval_reward);
    out += ',';
    out += cell(row.weighted_advantage);
    out += ',';
    out += cell(row.accuracy);
    out += '\n';
  }
  return out;
}

}  // namespace prefforge
