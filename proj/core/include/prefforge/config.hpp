#ifndef PREFFORGE_CONFIG_HPP_
#define PREFFORGE_CONFIG_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "prefforge/domain.hpp"

namespace prefforge {

// Run configuration: INI-style files with [section] headers, applied over
// built-in defaults, with command-line overrides applied last. Unknown
// section or key names are errors, not warnings.

struct RunConfig {
  OptimizerConfig optimizer;

  // [run]
  int steps = 200;
  int eval_every = 20;
  int parallelism = 1;
  std::string out_dir = "runs/default";

  // [gcpo]
  int batch_pairs = 32;
  double tie_delta = 0.0;
  double floor_score = 0.0;

  // [grpo]
  double floor_reward = 0.0;

  // [policy]
  double temperature = 1.0;
  std::uint64_t init_seed = 1;
  double init_scale = 0.1;

  bool operator==(const RunConfig&) const = default;
};

/// Parses INI text ("key = value" lines under [section] headers; '#' and ';'
/// comments). Unknown sections or keys raise Errc::unknown_key; malformed
/// lines or unparsable values raise Errc::config_parse.
RunConfig parse_config(std::string_view text, RunConfig base = {});

RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Applies one "section.key=value" override in place. Same error contract
/// as parse_config.
void apply_override(RunConfig& config, std::string_view assignment);

void apply_overrides(RunConfig& config,
                     const std::vector<std::string>& assignments);

/// Emits the full configuration as INI text that parse_config round-trips.
std::string encode_config(const RunConfig& config);

}  // namespace prefforge

#endif  // PREFFORGE_CONFIG_HPP_
