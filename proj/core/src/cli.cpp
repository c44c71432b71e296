#include "prefforge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefforge/adapters.hpp"
#include "prefforge/config.hpp"
#include "prefforge/domain.hpp"
#include "prefforge/errors.hpp"
#include "prefforge/evaluation.hpp"
#include "prefforge/gcpo.hpp"
#include "prefforge/grpo.hpp"
#include "prefforge/pipeline.hpp"
#include "prefforge/serialize.hpp"
#include "prefforge/templates.hpp"
#include "prefforge/toylab.hpp"
#include "prefforge/util.hpp"
#include "prefforge/version.hpp"

namespace prefforge {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset files: one JSONL with a "kind":"world" record (the synthetic world,
// contexts embedded) followed by "kind":"pair" preference records. A single
// file flows through gen-world -> pipeline -> gcpo -> eval.

struct ToyDataset {
  SyntheticWorld world;
  std::vector<PreferencePair> pairs;
};

ToyDataset load_dataset(const std::string& path) {
  const std::string text = read_file(path);
  ToyDataset out;
  bool have_world = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::size_t stop = end == std::string::npos ? text.size() : end;
    const std::string line = text.substr(start, stop - start);
    start = stop + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (end == std::string::npos) break;
      continue;
    }
    std::string kind;
    try {
      const json j = json::parse(line);
      kind = j.value("kind", std::string());
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (kind == "world") {
      out.world = decode_world(line);
      have_world = true;
    } else if (kind == "pair") {
      out.pairs.push_back(decode_preference_pair(line));
    } else {
      throw Error(Errc::parse_error, path + ":" + std::to_string(line_no) +
                                         ": unknown record kind '" + kind +
                                         "'");
    }
    if (end == std::string::npos) break;
  }
  if (!have_world)
    throw Error(Errc::parse_error, path + ": no world record found");
  return out;
}

void save_dataset(const std::string& path, const SyntheticWorld& world,
                  std::span<const PreferencePair> pairs) {
  std::ostringstream out;
  json jw = json::parse(encode_world(world));
  jw["kind"] = "world";
  out << jw.dump() << '\n';
  for (const PreferencePair& pair : pairs) {
    json jp = json::parse(encode(pair));
    jp["kind"] = "pair";
    out << jp.dump() << '\n';
  }
  write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Shared run plumbing.

struct ConfigInputs {
  std::string config_path;
  std::vector<std::string> sets;       // --set section.key=value, in order
  std::vector<std::string> flag_sets;  // named flags, applied last
};

RunConfig resolve_config(const ConfigInputs& in) {
  RunConfig cfg;
  if (!in.config_path.empty()) cfg = load_config_file(in.config_path, cfg);
  apply_overrides(cfg, in.sets);
  apply_overrides(cfg, in.flag_sets);
  return cfg;
}

// Named flags shared by the training subcommands; each maps onto a config
// key so precedence stays defaults -> file -> --set -> named flag.
void add_config_flags(CLI::App* cmd, ConfigInputs& in) {
  cmd->add_option("--config", in.config_path, "INI config file");
  cmd->add_option("--set", in.sets,
                  "section.key=value override (repeatable)");
  auto bind = [cmd, &in](const std::string& flag, const std::string& key,
                         const std::string& help) {
    cmd->add_option_function<std::string>(
        flag,
        [&in, key](const std::string& value) {
          in.flag_sets.push_back(key + "=" + value);
        },
        help);
  };
  bind("--seed", "optimizer.seed", "base RNG seed");
  bind("--out", "run.out_dir", "run output directory");
  bind("--parallelism", "run.parallelism", "worker thread count");
  bind("--steps", "run.steps", "training steps");
  bind("--eval-every", "run.eval_every", "steps between held-out evals");
  bind("--clip-epsilon", "optimizer.clip_epsilon", "surrogate clip width");
  bind("--group-size", "optimizer.group_size", "rollouts per group");
  bind("--kl-beta", "optimizer.kl_beta", "KL penalty weight");
  bind("--std-epsilon", "optimizer.std_epsilon",
       "stabilizer in the group normalization");
  bind("--lr", "optimizer.learning_rate", "gradient ascent step size");
}

std::string json_line(json j) {
  j["v"] = 1;
  return j.dump();
}

void print_json(json j) { std::cout << json_line(std::move(j)) << std::endl; }

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::int64_t seed, const RunConfig* cfg, json extra) {
  json manifest = std::move(extra);
  manifest["v"] = 1;
  manifest["command"] = command;
  manifest["version"] = kVersionString;
  manifest["seed"] = seed;
  if (cfg != nullptr) {
    const std::string text = encode_config(*cfg);
    write_file(out_dir + "/config.ini", text);
    manifest["config_hash"] = to_hex(fnv1a64(text));
  }
  write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::string file_hash(const std::string& path) {
  return to_hex(fnv1a64(read_file(path)));
}

class MetricsWriter {
 public:
  explicit MetricsWriter(std::string path) : path_(std::move(path)) {
    write_file(path_, "");  // a rerun replaces the series
  }

  void row(json j) { append_jsonl_line(path_, json_line(std::move(j))); }

 private:
  std::string path_;
};

// Seeded holdout split; the held rows keep Same pairs (accuracy excludes
// them), the train rows drop them up front.
struct PairSplit {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> held;
};

PairSplit split_pairs(const std::vector<PreferencePair>& pairs,
                      double holdout, std::uint64_t seed) {
  if (holdout < 0.0 || holdout > 1.0)
    throw Error(Errc::config_parse, "holdout fraction must be in [0,1]");
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rng = make_rng(derive_seed(seed, {0xE7A1}));
  std::shuffle(order.begin(), order.end(), rng);
  const auto held_n =
      static_cast<std::size_t>(std::lround(holdout * static_cast<double>(pairs.size())));
  PairSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const PreferencePair& pair = pairs[order[i]];
    if (i < held_n) {
      split.held.push_back(pair);
    } else if (pair.label != PreferenceLabel::Same) {
      split.train.push_back(pair);
    }
  }
  return split;
}

int count_labeled(std::span<const PreferencePair> pairs) {
  int n = 0;
  for (const auto& p : pairs)
    if (p.label != PreferenceLabel::Same) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// toy gen-world

struct GenWorldArgs {
  std::string out;
  int samples = 200;
  int candidates = 4;
  int pairs = 500;
  double noise = 0.0;
  double margin = 0.5;
  std::int64_t seed = 0;
};

int run_gen_world(const GenWorldArgs& a) {
  WorldParams params;
  params.samples = a.samples;
  params.candidates_per_context = a.candidates;
  params.noise_sigma = a.noise;
  params.same_margin = a.margin;
  params.seed = static_cast<std::uint64_t>(a.seed);
  const SyntheticWorld world = make_world(params);
  const std::vector<PreferencePair> pairs =
      make_pairs(world, a.pairs, derive_seed(params.seed, {11}));
  save_dataset(a.out, world, pairs);
  print_json({{"command", "toy gen-world"},
              {"out", a.out},
              {"samples", a.samples},
              {"contexts", world.contexts.size()},
              {"pairs", pairs.size()},
              {"seed", a.seed}});
  return 0;
}

// ---------------------------------------------------------------------------
// gcpo: reward-model training on a toy dataset.

struct GcpoArgs {
  std::string data;
  ConfigInputs config;
  double holdout = 0.2;
};

int run_gcpo(const GcpoArgs& a) {
  const RunConfig cfg = resolve_config(a.config);
  const ToyDataset data = load_dataset(a.data);
  const auto base_seed = static_cast<std::uint64_t>(cfg.optimizer.seed);

  const PairSplit split = split_pairs(data.pairs, a.holdout, base_seed);
  if (split.train.empty())
    throw Error(Errc::empty_batch, "no labeled training pairs in " + a.data);
  const bool has_eval = count_labeled(split.held) > 0;

  ToyPolicyOptions popts;
  popts.temperature = cfg.temperature;
  popts.init_seed = cfg.init_seed;
  popts.init_scale = cfg.init_scale;
  ToyScoringPolicy policy(world_feature_fn(data.world), kWorldFeatureDim,
                          popts);
  const auto score_fn = [&policy](const Quadruple& quad) {
    return policy.expected_score(quad);
  };

  const std::string& out = cfg.out_dir;
  write_manifest(out, "gcpo", cfg.optimizer.seed, &cfg,
                 {{"data", a.data},
                  {"data_hash", file_hash(a.data)},
                  {"holdout", a.holdout},
                  {"train_pairs", split.train.size()},
                  {"held_pairs", split.held.size()}});
  MetricsWriter metrics(out + "/metrics.jsonl");

  GcpoStepOptions opts;
  opts.tie_delta = cfg.tie_delta;
  opts.floor_score = cfg.floor_score;
  opts.parallelism = cfg.parallelism;

  std::optional<double> accuracy;
  if (has_eval) {
    accuracy = pairwise_accuracy(split.held, score_fn).accuracy;
    metrics.row({{"step", 0}, {"accuracy", *accuracy}});
  }

  std::mt19937_64 batch_rng = make_rng(derive_seed(base_seed, {0xBA7C}));
  std::uniform_int_distribution<std::size_t> pick(0, split.train.size() - 1);
  GcpoStepReport report;
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<PreferencePair> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_pairs));
    for (int b = 0; b < cfg.batch_pairs; ++b)
      batch.push_back(split.train[pick(batch_rng)]);

    OptimizerConfig step_cfg = cfg.optimizer;
    step_cfg.seed = static_cast<std::int64_t>(
        derive_seed(base_seed, {0x57E9, static_cast<std::uint64_t>(step)}));
    report = gcpo_step(policy, batch, step_cfg, opts);

    json row = {{"step", step},
                {"objective", report.objective},
                {"train_reward", report.mean_win_ratio},
                {"weighted_advantage", report.weighted_advantage}};
    const bool eval_now =
        has_eval && (step % cfg.eval_every == 0 || step == cfg.steps);
    if (eval_now) {
      accuracy = pairwise_accuracy(split.held, score_fn).accuracy;
      row["accuracy"] = *accuracy;
    }
    metrics.row(std::move(row));
  }

  save_policy_checkpoint(out + "/checkpoint.json", policy, data.world);
  json summary = {{"command", "gcpo"},
                  {"out_dir", out},
                  {"steps", cfg.steps},
                  {"objective", report.objective},
                  {"mean_win_ratio", report.mean_win_ratio},
                  {"checkpoint", out + "/checkpoint.json"}};
  if (accuracy) summary["accuracy"] = *accuracy;
  print_json(std::move(summary));
  return 0;
}

// ---------------------------------------------------------------------------
// grpo: generation-policy training against an oracle or a trained reward
// model.

struct GrpoArgs {
  std::string data;
  ConfigInputs config;
  std::string reward = "oracle";
  double holdout = 0.0;
};

RewardFn build_reward(const std::string& spec, const SyntheticWorld& world) {
  if (spec == "oracle") {
    auto latents = std::make_shared<std::map<std::string, double>>(
        world.latent_quality);
    return [latents](const std::string& sample_id, const EditContext&,
                     const PrincipleSet*) {
      const auto it = latents->find(sample_id);
      if (it == latents->end())
        throw Error(Errc::invariant_violation,
                    "sample_id: unknown sample '" + sample_id + "'");
      return it->second;
    };
  }
  if (spec.rfind("rrm:", 0) == 0) {
    auto loaded =
        std::make_shared<LoadedPolicy>(load_policy_checkpoint(spec.substr(4)));
    return [loaded](const std::string& sample_id, const EditContext& ctx,
                    const PrincipleSet* principles) {
      Quadruple quad;
      quad.edited_sample = sample_id;
      quad.context = ctx;
      if (principles != nullptr) quad.principles = *principles;
      return loaded->policy->expected_score(quad);
    };
  }
  throw Error(Errc::config_parse,
              "reward must be 'oracle' or 'rrm:<checkpoint>', got '" + spec +
                  "'");
}

int run_grpo(const GrpoArgs& a) {
  const RunConfig cfg = resolve_config(a.config);
  const ToyDataset data = load_dataset(a.data);
  const auto base_seed = static_cast<std::uint64_t>(cfg.optimizer.seed);
  if (data.world.contexts.empty())
    throw Error(Errc::empty_batch, "no contexts in " + a.data);

  std::vector<ContextRecord> train = data.world.contexts;
  std::vector<ContextRecord> held;
  if (a.holdout > 0.0) {
    if (a.holdout > 1.0)
      throw Error(Errc::config_parse, "holdout fraction must be in [0,1]");
    std::shuffle(train.begin(), train.end(),
                 make_rng(derive_seed(base_seed, {0xE7A2})));
    const auto held_n = static_cast<std::size_t>(
        std::lround(a.holdout * static_cast<double>(train.size())));
    held.assign(train.end() - static_cast<std::ptrdiff_t>(held_n),
                train.end());
    train.resize(train.size() - held_n);
  }
  if (train.empty())
    throw Error(Errc::empty_batch, "no training contexts after holdout");

  ToyTokenOptions topts;
  topts.temperature = cfg.temperature;
  topts.init_seed = cfg.init_seed;
  topts.init_scale = cfg.init_scale;
  // The policy covers every context (held-out rows included); training only
  // touches the rows the train split samples.
  ToyTokenPolicy policy =
      ToyTokenPolicy::for_candidates(data.world.contexts, topts);
  const RewardFn reward = build_reward(a.reward, data.world);
  const std::vector<double> reference = policy.params();

  const std::string& out = cfg.out_dir;
  write_manifest(out, "grpo", cfg.optimizer.seed, &cfg,
                 {{"data", a.data},
                  {"data_hash", file_hash(a.data)},
                  {"reward", a.reward},
                  {"train_contexts", train.size()},
                  {"held_contexts", held.size()}});
  MetricsWriter metrics(out + "/metrics.jsonl");

  GrpoStepReport report;
  for (int step = 1; step <= cfg.steps; ++step) {
    GrpoStepOptions opts;
    opts.floor_reward = cfg.floor_reward;
    opts.parallelism = cfg.parallelism;
    opts.reference_params = reference;
    const bool eval_now =
        !held.empty() && (step % cfg.eval_every == 0 || step == cfg.steps);
    if (eval_now) {
      opts.eval_contexts = held;
      opts.eval_seed =
          derive_seed(base_seed, {0xE7A3, static_cast<std::uint64_t>(step)});
    }

    OptimizerConfig step_cfg = cfg.optimizer;
    step_cfg.seed = static_cast<std::int64_t>(
        derive_seed(base_seed, {0x6790, static_cast<std::uint64_t>(step)}));
    report = grpo_step(policy, reward, train, step_cfg, opts);

    json row = {{"step", step},
                {"objective", report.objective},
                {"train_reward", report.train_reward},
                {"mean_kl", report.mean_kl}};
    if (report.eval_reward) row["eval_reward"] = *report.eval_reward;
    metrics.row(std::move(row));
  }

  const std::vector<double> params = policy.params();
  write_file(out + "/policy.json",
             json_line({{"kind", "toy-token"},
                        {"vocab_size", policy.vocab_size()},
                        {"params", params}}) +
                 "\n");
  json summary = {{"command", "grpo"},
                  {"out_dir", out},
                  {"steps", cfg.steps},
                  {"objective", report.objective},
                  {"train_reward", report.train_reward},
                  {"mean_kl", report.mean_kl}};
  if (report.eval_reward) summary["eval_reward"] = *report.eval_reward;
  print_json(std::move(summary));
  return 0;
}

// ---------------------------------------------------------------------------
// pipeline: cold-start curation over the dataset's contexts.

struct PipelineArgs {
  std::string data;
  std::string out;
  std::string step = "all";
  std::string judge;
  std::vector<std::string> scorers;
  std::string templates_dir;
  std::vector<double> temperatures;
  int parallelism = 1;
  std::int64_t seed = 0;
  std::string curate = "none";
  double ratio = 1.0;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  const ToyDataset data = load_dataset(a.data);
  std::vector<ContextRecord> records = data.world.contexts;

  if (a.curate != "none") {
    std::vector<EditContext> contexts;
    contexts.reserve(records.size());
    for (const auto& r : records) contexts.push_back(r.context);
    CurateOptions copts;
    copts.ratio = a.ratio;
    copts.seed = static_cast<std::uint64_t>(a.seed);
    std::vector<EditContext> kept;
    if (a.curate == "random") {
      kept = curate_split(contexts, CurateMode::Random, copts);
    } else if (a.curate == "hard") {
      VerbCountFilter filter;
      kept = curate_split(contexts, CurateMode::Hard, copts, &filter);
    } else {
      throw Error(Errc::config_parse,
                  "curate must be none|random|hard, got '" + a.curate + "'");
    }
    std::set<std::string> keys;
    for (const auto& ctx : kept) keys.insert(context_key(ctx));
    std::vector<ContextRecord> filtered;
    for (auto& r : records)
      if (keys.count(context_key(r.context)) > 0)
        filtered.push_back(std::move(r));
    records = std::move(filtered);
  }

  TemplateRegistry templates = TemplateRegistry::with_defaults();
  if (!a.templates_dir.empty()) templates.load_directory(a.templates_dir);

  std::unique_ptr<JudgeClient> judge;
  if (a.judge.empty()) {
    judge = std::make_unique<StubJudge>(data.world);
  } else {
    judge = make_transport_judge(AdapterSpec::parse(a.judge), templates);
  }

  std::vector<std::unique_ptr<ScorerClient>> owned;
  if (a.scorers.empty()) {
    owned.push_back(std::make_unique<StubScorer>(
        data.world, "stub", static_cast<std::uint64_t>(a.seed)));
  } else {
    for (const std::string& spec : a.scorers)
      owned.push_back(
          make_transport_scorer(AdapterSpec::parse(spec), templates));
  }
  std::vector<ScorerClient*> pool;
  pool.reserve(owned.size());
  for (auto& s : owned) pool.push_back(s.get());

  PipelineOptions opts;
  opts.parallelism = a.parallelism;
  opts.variants.clear();
  const std::vector<double> temps =
      a.temperatures.empty() ? std::vector<double>{1.0} : a.temperatures;
  for (double t : temps) {
    SamplingParams params;
    params.temperature = t;
    params.seed = static_cast<std::uint64_t>(a.seed);
    opts.variants.push_back(params);
  }

  write_manifest(a.out, "pipeline", a.seed, nullptr,
                 {{"data", a.data},
                  {"data_hash", file_hash(a.data)},
                  {"step", a.step},
                  {"judge", a.judge.empty() ? "stub" : a.judge},
                  {"scorers", a.scorers.empty()
                                  ? std::vector<std::string>{"stub"}
                                  : a.scorers},
                  {"temperatures", temps},
                  {"curate", a.curate},
                  {"ratio", a.ratio},
                  {"contexts", records.size()}});

  const PipelineReport report =
      run_pipeline(records, a.step, *judge, pool, a.out, opts);
  print_json({{"command", "pipeline"},
              {"out_dir", a.out},
              {"step", a.step},
              {"contexts", report.contexts},
              {"decomposed", report.decomposed},
              {"quadruples", report.quadruples},
              {"candidates", report.candidates},
              {"parse_failures", report.parse_failures},
              {"selected", report.selected}});
  return 0;
}

// ---------------------------------------------------------------------------
// eval accuracy

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  bool oracle = false;
  bool half_credit = false;
  int best_of = 1;
  std::string aggregate = "mean";
  std::int64_t seed = 0;
};

int run_eval_accuracy(const EvalArgs& a) {
  if (a.oracle != a.checkpoint.empty())
    throw Error(Errc::config_parse,
                "pass exactly one of --oracle or --checkpoint");
  if (a.best_of < 1)
    throw Error(Errc::config_parse, "--best-of must be at least 1");
  Aggregate aggregate;
  if (a.aggregate == "mean") {
    aggregate = Aggregate::mean;
  } else if (a.aggregate == "median") {
    aggregate = Aggregate::median;
  } else {
    throw Error(Errc::config_parse,
                "aggregate must be mean|median, got '" + a.aggregate + "'");
  }

  const ToyDataset data = load_dataset(a.data);
  std::shared_ptr<LoadedPolicy> loaded;
  ScoreFn score_fn;
  std::uint64_t draw = 0;
  if (a.oracle) {
    score_fn = oracle_score_fn(data.world);
  } else {
    loaded = std::make_shared<LoadedPolicy>(load_policy_checkpoint(a.checkpoint));
    if (a.best_of <= 1) {
      score_fn = [loaded](const Quadruple& quad) {
        return loaded->policy->expected_score(quad);
      };
    } else {
      const auto base = static_cast<std::uint64_t>(a.seed);
      ScoreFn sampled = [loaded, base, &draw](const Quadruple& quad) {
        const ReasoningTrace trace =
            loaded->policy->sample_trace(quad, derive_seed(base, {draw++}));
        return trace.final_score;
      };
      score_fn = [sampled, n = a.best_of, aggregate](const Quadruple& quad) {
        return best_of_n_score(quad, sampled, n, aggregate);
      };
    }
  }

  const AccuracyReport report =
      pairwise_accuracy(data.pairs, score_fn, a.half_credit);
  print_json({{"command", "eval accuracy"},
              {"accuracy", report.accuracy},
              {"evaluated", report.evaluated},
              {"excluded", report.excluded},
              {"scorer", a.oracle ? "oracle" : a.checkpoint},
              {"best_of", a.best_of}});
  return 0;
}

// ---------------------------------------------------------------------------
// metrics: run directory -> aligned CSV.

struct MetricsArgs {
  std::string run;
  std::string out;
};

int run_metrics(const MetricsArgs& a) {
  const std::vector<MetricsRow> rows = metrics_series(a.run);
  const std::string csv = metrics_csv(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_file(a.out, csv);
  }
  return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  CLI::App app{
      "prefforge: preference-learning toolkit — reward-model training from "
      "pairwise preferences (gcpo), downstream policy optimization (grpo), "
      "cold-start trace curation (pipeline), and evaluation utilities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersionString);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  // toy
  auto* toy = app.add_subcommand("toy", "synthetic dataset utilities");
  toy->require_subcommand(1);
  GenWorldArgs gw;
  auto* gen_world = toy->add_subcommand(
      "gen-world", "generate a synthetic world plus preference pairs");
  gen_world->add_option("--out", gw.out, "output dataset (.jsonl)")
      ->required();
  gen_world->add_option("--samples", gw.samples, "total samples")->capture_default_str();
  gen_world->add_option("--candidates", gw.candidates,
                        "candidates per context")->capture_default_str();
  gen_world->add_option("--pairs", gw.pairs, "preference pairs to draw")->capture_default_str();
  gen_world->add_option("--noise", gw.noise, "scorer observation noise")->capture_default_str();
  gen_world->add_option("--margin", gw.margin, "Same-label quality margin")->capture_default_str();
  gen_world->add_option("--seed", gw.seed, "world seed")->capture_default_str();

  // gcpo
  GcpoArgs gc;
  auto* gcpo_cmd = app.add_subcommand(
      "gcpo", "train the pointwise reward model on preference pairs");
  gcpo_cmd->add_option("--data", gc.data, "dataset from toy gen-world")
      ->required();
  gcpo_cmd->add_option("--holdout", gc.holdout,
                       "held-out pair fraction for accuracy")->capture_default_str();
  add_config_flags(gcpo_cmd, gc.config);

  // grpo
  GrpoArgs gr;
  auto* grpo_cmd = app.add_subcommand(
      "grpo", "optimize the generation policy with group-relative updates");
  grpo_cmd->add_option("--data", gr.data, "dataset from toy gen-world")
      ->required();
  grpo_cmd->add_option("--reward", gr.reward,
                       "'oracle' or 'rrm:<checkpoint.json>'")->capture_default_str();
  grpo_cmd->add_option("--holdout", gr.holdout,
                       "held-out context fraction for eval reward")->capture_default_str();
  add_config_flags(grpo_cmd, gr.config);

  // pipeline
  PipelineArgs pl;
  auto* pipe_cmd = app.add_subcommand(
      "pipeline", "cold-start curation: decompose/score/verify/select");
  pipe_cmd->add_option("--data", pl.data, "dataset from toy gen-world")
      ->required();
  pipe_cmd->add_option("--out", pl.out, "pipeline output directory")
      ->required();
  pipe_cmd->add_option("--step", pl.step,
                       "decompose|score|verify|select|all")->capture_default_str();
  pipe_cmd->add_option("--judge", pl.judge,
                       "judge adapter [name=]kind:target[?k=v] "
                       "(default: stub backed by the dataset world)");
  pipe_cmd->add_option("--scorer", pl.scorers,
                       "scorer adapter spec (repeatable; default stub)");
  pipe_cmd->add_option("--templates", pl.templates_dir,
                       "directory of <name>.txt prompt templates");
  pipe_cmd->add_option("--temperature", pl.temperatures,
                       "sampling temperature (repeatable; default 1.0)");
  pipe_cmd->add_option("--parallelism", pl.parallelism, "worker threads")->capture_default_str();
  pipe_cmd->add_option("--seed", pl.seed, "sampling seed")->capture_default_str();
  pipe_cmd->add_option("--curate", pl.curate, "none|random|hard")->capture_default_str();
  pipe_cmd->add_option("--ratio", pl.ratio, "random-curation keep fraction")->capture_default_str();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluation commands");
  eval_cmd->require_subcommand(1);
  EvalArgs ev;
  auto* acc_cmd = eval_cmd->add_subcommand(
      "accuracy", "pairwise preference accuracy of a scorer");
  acc_cmd->add_option("--data", ev.data, "dataset from toy gen-world")
      ->required();
  acc_cmd->add_option("--checkpoint", ev.checkpoint,
                      "reward-model checkpoint to evaluate");
  acc_cmd->add_flag("--oracle", ev.oracle,
                    "score with the world's latent quality instead");
  acc_cmd->add_flag("--half-credit-ties", ev.half_credit,
                    "count equal model scores as 0.5 instead of 0");
  acc_cmd->add_option("--best-of", ev.best_of,
                      "sample N traces per pair side and aggregate")->capture_default_str();
  acc_cmd->add_option("--aggregate", ev.aggregate, "mean|median")->capture_default_str();
  acc_cmd->add_option("--seed", ev.seed, "sampling seed for --best-of")->capture_default_str();

  // metrics
  MetricsArgs mt;
  auto* metrics_cmd =
      app.add_subcommand("metrics", "export a run's metrics as CSV");
  metrics_cmd->add_option("--run", mt.run, "run directory")->required();
  metrics_cmd->add_option("--out", mt.out, "CSV output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n"
              << app.help() << std::flush;
    return 2;
  }

  try {
    if (gen_world->parsed()) return run_gen_world(gw);
    if (gcpo_cmd->parsed()) return run_gcpo(gc);
    if (grpo_cmd->parsed()) return run_grpo(gr);
    if (pipe_cmd->parsed()) return run_pipeline_cmd(pl);
    if (acc_cmd->parsed()) return run_eval_accuracy(ev);
    if (metrics_cmd->parsed()) return run_metrics(mt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand selected\n\n" << app.help() << std::flush;
  return 2;
}

int run_command(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("prefforge");
  for (const std::string& arg : args) argv.push_back(arg.c_str());
  return run_command(static_cast<int>(argv.size()), argv.data());
}

}  // namespace prefforge
