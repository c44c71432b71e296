#include "prefforge/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <system_error>

#include <json.hpp>

#include "prefforge/errors.hpp"
#include "prefforge/pipeline.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

using nlohmann::json;

void check_version(const json& j) {
  if (!j.is_object())
    throw Error(Errc::parse_error, "expected a JSON object line");
  auto it = j.find("v");
  if (it == j.end())
    throw Error(Errc::parse_error, "missing schema version field \"v\"");
  if (!it->is_number_integer() || it->get<int>() != 1)
    throw Error(Errc::parse_error,
                "unsupported schema version " + it->dump());
}

template <typename Fn>
auto decode_with(std::string_view line, const char* what, Fn fn) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string(what) + ": " + e.what());
  }
  check_version(j);
  try {
    return fn(j);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string(what) + ": " + e.what());
  }
}

// Nested object helpers; only top-level lines carry "v".

json to_json(const Principle& p) {
  return json{{"id", p.id},
              {"text", p.text},
              {"category", std::string(category_name(p.category))}};
}

Principle principle_from(const json& j) {
  Principle p;
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.category = category_from_name(j.at("category").get<std::string>());
  return p;
}

json to_json(const PrincipleSet& set) {
  json principles = json::array();
  for (const auto& p : set.principles) principles.push_back(to_json(p));
  return json{{"context_id", set.context_id}, {"principles", principles}};
}

PrincipleSet principle_set_from(const json& j) {
  PrincipleSet set;
  set.context_id = j.at("context_id").get<std::string>();
  for (const auto& e : j.at("principles")) set.principles.push_back(principle_from(e));
  return set;
}

json to_json(const EditContext& ctx) {
  return json{{"reference_sample", ctx.reference_sample},
              {"instruction", ctx.instruction}};
}

EditContext edit_context_from(const json& j) {
  EditContext ctx;
  ctx.reference_sample = j.at("reference_sample").get<std::string>();
  ctx.instruction = j.at("instruction").get<std::string>();
  return ctx;
}

json to_json(const Quadruple& quad) {
  return json{{"edited_sample", quad.edited_sample},
              {"context", to_json(quad.context)},
              {"principles", to_json(quad.principles)}};
}

Quadruple quadruple_from(const json& j) {
  Quadruple quad;
  quad.edited_sample = j.at("edited_sample").get<std::string>();
  quad.context = edit_context_from(j.at("context"));
  quad.principles = principle_set_from(j.at("principles"));
  return quad;
}

json to_json(const PrincipleVerdict& v) {
  return json{{"principle_id", v.principle_id}, {"met", v.met}, {"reason", v.reason}};
}

PrincipleVerdict verdict_from(const json& j) {
  PrincipleVerdict v;
  v.principle_id = j.at("principle_id").get<std::string>();
  v.met = j.at("met").get<int>();
  v.reason = j.value("reason", std::string());
  return v;
}

json to_json(const ReasoningTrace& t) {
  json verdicts = json::array();
  for (const auto& v : t.verdicts) verdicts.push_back(to_json(v));
  return json{{"think_text", t.think_text},
              {"verdicts", verdicts},
              {"average_score", t.average_score},
              {"final_score", t.final_score},
              {"token_ids", t.token_ids},
              {"token_logprobs_current", t.token_logprobs_current},
              {"token_logprobs_old", t.token_logprobs_old}};
}

ReasoningTrace trace_from(const json& j) {
  ReasoningTrace t;
  t.think_text = j.value("think_text", std::string());
  for (const auto& e : j.at("verdicts")) t.verdicts.push_back(verdict_from(e));
  t.average_score = j.at("average_score").get<double>();
  t.final_score = j.at("final_score").get<double>();
  t.token_ids = j.at("token_ids").get<std::vector<int>>();
  t.token_logprobs_current =
      j.at("token_logprobs_current").get<std::vector<double>>();
  t.token_logprobs_old = j.at("token_logprobs_old").get<std::vector<double>>();
  return t;
}

json to_json(const PreferencePair& pair) {
  return json{{"context", to_json(pair.context)},
              {"winner", to_json(pair.winner)},
              {"loser", to_json(pair.loser)},
              {"label", std::string(label_name(pair.label))}};
}

PreferencePair pair_from(const json& j) {
  PreferencePair pair;
  pair.context = edit_context_from(j.at("context"));
  pair.winner = quadruple_from(j.at("winner"));
  pair.loser = quadruple_from(j.at("loser"));
  pair.label = label_from_name(j.at("label").get<std::string>());
  return pair;
}

json to_json(const RolloutGroup& g) {
  json traces = json::array();
  for (const auto& t : g.traces) traces.push_back(to_json(t));
  return json{{"sample", to_json(g.sample)},
              {"traces", traces},
              {"scores", g.scores},
              {"rewards", g.rewards},
              {"advantages", g.advantages}};
}

RolloutGroup group_from(const json& j) {
  RolloutGroup g;
  g.sample = quadruple_from(j.at("sample"));
  for (const auto& e : j.at("traces")) g.traces.push_back(trace_from(e));
  g.scores = j.value("scores", std::vector<double>());
  g.rewards = j.value("rewards", std::vector<double>());
  g.advantages = j.value("advantages", std::vector<double>());
  return g;
}

json to_json(const OptimizerConfig& cfg) {
  return json{{"group_size", cfg.group_size},
              {"clip_epsilon", cfg.clip_epsilon},
              {"kl_beta", cfg.kl_beta},
              {"std_epsilon", cfg.std_epsilon},
              {"learning_rate", cfg.learning_rate},
              {"seed", cfg.seed}};
}

OptimizerConfig optimizer_from(const json& j) {
  OptimizerConfig cfg;
  cfg.group_size = j.at("group_size").get<int>();
  cfg.clip_epsilon = j.at("clip_epsilon").get<double>();
  cfg.kl_beta = j.at("kl_beta").get<double>();
  cfg.std_epsilon = j.at("std_epsilon").get<double>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.seed = j.value("seed", std::int64_t{0});
  return cfg;
}

json to_json(const ContextRecord& r) {
  json j{{"context", to_json(r.context)}, {"candidates", r.candidates}};
  j["principles"] = r.principles ? to_json(*r.principles) : json(nullptr);
  return j;
}

ContextRecord context_record_from(const json& j) {
  ContextRecord r;
  r.context = edit_context_from(j.at("context"));
  r.candidates = j.value("candidates", std::vector<std::string>());
  auto it = j.find("principles");
  if (it != j.end() && !it->is_null()) r.principles = principle_set_from(*it);
  return r;
}

json to_json(const SftRecord& r) {
  return json{{"quadruple", to_json(r.quadruple)},
              {"trace", to_json(r.trace)},
              {"verification_accuracy", r.verification_accuracy},
              {"provenance",
               json{{"scorer_id", r.provenance.scorer_id},
                    {"sampling_params",
                     json{{"temperature", r.provenance.sampling_params.temperature},
                          {"prompt_key", r.provenance.sampling_params.prompt_key},
                          {"seed", r.provenance.sampling_params.seed}}}}}};
}

SftRecord sft_record_from(const json& j) {
  SftRecord r;
  r.quadruple = quadruple_from(j.at("quadruple"));
  r.trace = trace_from(j.at("trace"));
  r.verification_accuracy = j.at("verification_accuracy").get<double>();
  const json& prov = j.at("provenance");
  r.provenance.scorer_id = prov.at("scorer_id").get<std::string>();
  const json& sp = prov.at("sampling_params");
  r.provenance.sampling_params.temperature = sp.at("temperature").get<double>();
  r.provenance.sampling_params.prompt_key = sp.at("prompt_key").get<std::string>();
  r.provenance.sampling_params.seed = sp.at("seed").get<std::uint64_t>();
  return r;
}

std::string top_level(json j) {
  j["v"] = 1;
  return j.dump();
}

}  // namespace

std::string encode(const Principle& p) { return top_level(to_json(p)); }
std::string encode(const PrincipleSet& set) { return top_level(to_json(set)); }
std::string encode(const EditContext& ctx) { return top_level(to_json(ctx)); }
std::string encode(const Quadruple& quad) { return top_level(to_json(quad)); }
std::string encode(const PrincipleVerdict& v) { return top_level(to_json(v)); }
std::string encode(const ReasoningTrace& t) { return top_level(to_json(t)); }
std::string encode(const PreferencePair& pair) { return top_level(to_json(pair)); }
std::string encode(const RolloutGroup& g) { return top_level(to_json(g)); }
std::string encode(const OptimizerConfig& cfg) { return top_level(to_json(cfg)); }
std::string encode(const ContextRecord& r) { return top_level(to_json(r)); }
std::string encode(const SftRecord& r) { return top_level(to_json(r)); }

Principle decode_principle(std::string_view line) {
  auto p = decode_with(line, "Principle", principle_from);
  validate(p);
  return p;
}

PrincipleSet decode_principle_set(std::string_view line) {
  auto set = decode_with(line, "PrincipleSet", principle_set_from);
  validate(set);
  return set;
}

EditContext decode_edit_context(std::string_view line) {
  auto ctx = decode_with(line, "EditContext", edit_context_from);
  validate(ctx);
  return ctx;
}

Quadruple decode_quadruple(std::string_view line) {
  auto quad = decode_with(line, "Quadruple", quadruple_from);
  validate(quad);
  return quad;
}

PrincipleVerdict decode_principle_verdict(std::string_view line) {
  auto v = decode_with(line, "PrincipleVerdict", verdict_from);
  validate(v);
  return v;
}

ReasoningTrace decode_reasoning_trace(std::string_view line) {
  auto t = decode_with(line, "ReasoningTrace", trace_from);
  validate(t);
  return t;
}

PreferencePair decode_preference_pair(std::string_view line) {
  auto pair = decode_with(line, "PreferencePair", pair_from);
  validate(pair);
  return pair;
}

RolloutGroup decode_rollout_group(std::string_view line) {
  auto g = decode_with(line, "RolloutGroup", group_from);
  validate(g);
  return g;
}

OptimizerConfig decode_optimizer_config(std::string_view line) {
  auto cfg = decode_with(line, "OptimizerConfig", optimizer_from);
  validate(cfg);
  return cfg;
}

ContextRecord decode_context_record(std::string_view line) {
  auto r = decode_with(line, "ContextRecord", context_record_from);
  validate(r.context);
  if (r.principles) validate(*r.principles);
  return r;
}

SftRecord decode_sft_record(std::string_view line) {
  auto r = decode_with(line, "SftRecord", sft_record_from);
  validate(r.quadruple);
  validate(r.trace);
  return r;
}

template <typename T>
std::vector<T> read_jsonl(const std::string& path,
                          T (*decoder)(std::string_view)) {
  std::string content = read_file(path);
  std::vector<T> out;
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
    try {
      out.push_back(decoder(line));
    } catch (const Error& e) {
      throw Error(e.code(),
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void append_jsonl_line(const std::string& path, std::string_view line) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::io_error, "cannot open for appending: " + path);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  out.flush();
  if (!out) throw Error(Errc::io_error, "append failed: " + path);
}

template std::vector<Principle> read_jsonl(const std::string&,
                                           Principle (*)(std::string_view));
template std::vector<PrincipleSet> read_jsonl(const std::string&,
                                              PrincipleSet (*)(std::string_view));
template std::vector<EditContext> read_jsonl(const std::string&,
                                             EditContext (*)(std::string_view));
template std::vector<Quadruple> read_jsonl(const std::string&,
                                           Quadruple (*)(std::string_view));
template std::vector<PreferencePair> read_jsonl(
    const std::string&, PreferencePair (*)(std::string_view));
template std::vector<ContextRecord> read_jsonl(
    const std::string&, ContextRecord (*)(std::string_view));
template std::vector<ReasoningTrace> read_jsonl(
    const std::string&, ReasoningTrace (*)(std::string_view));
template std::vector<RolloutGroup> read_jsonl(
    const std::string&, RolloutGroup (*)(std::string_view));
template std::vector<SftRecord> read_jsonl(const std::string&,
                                           SftRecord (*)(std::string_view));

}  // namespace prefforge
