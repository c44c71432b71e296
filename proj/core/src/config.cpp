#include "prefforge/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>

#include "prefforge/errors.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

template <typename T>
T parse_value(std::string_view key, std::string_view raw) {
  std::string text = trim(raw);
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    T value{};
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
      throw Error(Errc::config_parse,
                  std::string(key) + ": cannot parse value \"" + text + "\"");
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(value))
        throw Error(Errc::config_parse,
                    std::string(key) + ": value must be finite");
    }
    return value;
  }
}

using Setter = std::function<void(RunConfig&, std::string_view key,
                                  std::string_view value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto field = [&](const char* key, auto member) {
      t[key] = [member](RunConfig& c, std::string_view k, std::string_view v) {
        using Field = std::remove_reference_t<decltype(c.*member)>;
        c.*member = parse_value<Field>(k, v);
      };
    };
    auto optimizer_field = [&](const char* key, auto member) {
      t[key] = [member](RunConfig& c, std::string_view k, std::string_view v) {
        using Field = std::remove_reference_t<decltype(c.optimizer.*member)>;
        c.optimizer.*member = parse_value<Field>(k, v);
      };
    };
    optimizer_field("optimizer.group_size", &OptimizerConfig::group_size);
    optimizer_field("optimizer.clip_epsilon", &OptimizerConfig::clip_epsilon);
    optimizer_field("optimizer.kl_beta", &OptimizerConfig::kl_beta);
    optimizer_field("optimizer.std_epsilon", &OptimizerConfig::std_epsilon);
    optimizer_field("optimizer.learning_rate", &OptimizerConfig::learning_rate);
    optimizer_field("optimizer.seed", &OptimizerConfig::seed);
    field("run.steps", &RunConfig::steps);
    field("run.eval_every", &RunConfig::eval_every);
    field("run.parallelism", &RunConfig::parallelism);
    field("run.out_dir", &RunConfig::out_dir);
    field("gcpo.batch_pairs", &RunConfig::batch_pairs);
    field("gcpo.tie_delta", &RunConfig::tie_delta);
    field("gcpo.floor_score", &RunConfig::floor_score);
    field("grpo.floor_reward", &RunConfig::floor_reward);
    field("policy.temperature", &RunConfig::temperature);
    field("policy.init_seed", &RunConfig::init_seed);
    field("policy.init_scale", &RunConfig::init_scale);
    return t;
  }();
  return table;
}

void apply_one(RunConfig& config, std::string_view dotted_key,
               std::string_view value) {
  auto it = setters().find(std::string(dotted_key));
  if (it == setters().end())
    throw Error(Errc::unknown_key,
                "unknown configuration key: " + std::string(dotted_key));
  it->second(config, dotted_key, value);
}

}  // namespace

RunConfig parse_config(std::string_view text, RunConfig base) {
  RunConfig config = std::move(base);
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view raw_line;
    if (nl == std::string_view::npos) {
      raw_line = text.substr(pos);
      pos = text.size() + 1;
    } else {
      raw_line = text.substr(pos, nl - pos);
      pos = nl + 1;
    }
    ++line_no;
    std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(Errc::config_parse,
                    "line " + std::to_string(line_no) + ": unterminated section");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty())
        throw Error(Errc::config_parse,
                    "line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::config_parse,
                  "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty())
      throw Error(Errc::config_parse,
                  "line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw Error(Errc::config_parse,
                  "line " + std::to_string(line_no) +
                      ": key outside of any [section]");
    try {
      apply_one(config, section + "." + key, value);
    } catch (const Error& e) {
      std::string detail = e.what();
      std::string prefix = std::string(errc_name(e.code())) + ": ";
      if (detail.rfind(prefix, 0) == 0) detail = detail.substr(prefix.size());
      throw Error(e.code(),
                  "line " + std::to_string(line_no) + ": " + detail);
    }
  }
  return config;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  return parse_config(read_file(path), std::move(base));
}

void apply_override(RunConfig& config, std::string_view assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw Error(Errc::config_parse,
                "override needs section.key=value, got: " +
                    std::string(assignment));
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (key.find('.') == std::string::npos)
    throw Error(Errc::config_parse,
                "override key needs a section prefix: " + key);
  apply_one(config, key, value);
}

void apply_overrides(RunConfig& config,
                     const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) apply_override(config, a);
}

std::string encode_config(const RunConfig& c) {
  std::string out;
  out += "[optimizer]\n";
  out += "group_size = " + std::to_string(c.optimizer.group_size) + "\n";
  out += "clip_epsilon = " + format_double(c.optimizer.clip_epsilon) + "\n";
  out += "kl_beta = " + format_double(c.optimizer.kl_beta) + "\n";
  out += "std_epsilon = " + format_double(c.optimizer.std_epsilon) + "\n";
  out += "learning_rate = " + format_double(c.optimizer.learning_rate) + "\n";
  out += "seed = " + std::to_string(c.optimizer.seed) + "\n";
  out += "\n[run]\n";
  out += "steps = " + std::to_string(c.steps) + "\n";
  out += "eval_every = " + std::to_string(c.eval_every) + "\n";
  out += "parallelism = " + std::to_string(c.parallelism) + "\n";
  out += "out_dir = " + c.out_dir + "\n";
  out += "\n[gcpo]\n";
  out += "batch_pairs = " + std::to_string(c.batch_pairs) + "\n";
  out += "tie_delta = " + format_double(c.tie_delta) + "\n";
  out += "floor_score = " + format_double(c.floor_score) + "\n";
  out += "\n[grpo]\n";
  out += "floor_reward = " + format_double(c.floor_reward) + "\n";
  out += "\n[policy]\n";
  out += "temperature = " + format_double(c.temperature) + "\n";
  out += "init_seed = " + std::to_string(c.init_seed) + "\n";
  out += "init_scale = " + format_double(c.init_scale) + "\n";
  return out;
}

}  // namespace prefforge
