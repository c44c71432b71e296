#include "prefforge/adapters.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include <httplib.h>
#include <json.hpp>

#include "prefforge/errors.hpp"
#include "prefforge/serialize.hpp"
#include "prefforge/toylab.hpp"
#include "prefforge/util.hpp"

namespace prefforge {

namespace {

using nlohmann::json;

std::string numbered_points(const PrincipleSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.principles.size(); ++i) {
    out += std::to_string(i + 1) + ". " + set.principles[i].text;
    if (i + 1 < set.principles.size()) out += '\n';
  }
  return out;
}

double parse_option_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  double parsed = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw Error(Errc::config_parse,
                "adapter option " + key + " is not a number: " + value);
  return parsed;
}

std::string temp_payload_path() {
  static std::atomic<std::uint64_t> counter{0};
  auto now = static_cast<std::uint64_t>(
      std::chrono::steady_clock::now().time_since_epoch().count());
  std::uint64_t tag = mix64(now ^ mix64(counter.fetch_add(1)));
  return (std::filesystem::temp_directory_path() /
          ("prefforge-" + to_hex(tag) + ".json"))
      .string();
}

struct UrlParts {
  std::string base;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  if (url.rfind("https://", 0) == 0)
    throw Error(Errc::adapter_error,
                "https targets are not supported in this build: " + url);
  if (url.rfind("http://", 0) != 0)
    throw Error(Errc::adapter_error, "http adapter needs an http:// url: " + url);
  std::size_t host_begin = std::string("http://").size();
  std::size_t slash = url.find('/', host_begin);
  UrlParts parts;
  if (slash == std::string::npos) {
    parts.base = url;
    parts.path = "/";
  } else {
    parts.base = url.substr(0, slash);
    parts.path = url.substr(slash);
  }
  return parts;
}

std::string transport_name(const AdapterSpec& spec) {
  return spec.name.empty() ? spec.kind + ":" + spec.target : spec.name;
}

std::string dispatch(const AdapterSpec& spec, const std::string& payload) {
  if (spec.kind == "cmd")
    return run_command_adapter(spec.target, payload,
                               spec.option_or("timeout", 0.0));
  if (spec.kind == "http")
    return run_http_adapter(spec.target, payload,
                            spec.option_or("timeout", 30.0));
  throw Error(Errc::adapter_error, "unsupported adapter kind: " + spec.kind);
}

class TransportScorer final : public ScorerClient {
 public:
  TransportScorer(AdapterSpec spec, const TemplateRegistry& templates)
      : spec_(std::move(spec)), templates_(templates) {}

  std::string id() const override { return transport_name(spec_); }

  RawTraceText score(const Quadruple& quad,
                     const SamplingParams& params) override {
    std::string prompt = render_template(
        templates_.get(params.prompt_key),
        {{"EDIT_INSTRUCTION", quad.context.instruction},
         {"QUESTION_POINTS", numbered_points(quad.principles)}});
    json payload{{"v", 1},
                 {"task", "score"},
                 {"quadruple", json::parse(encode(quad))},
                 {"sampling",
                  json{{"temperature", params.temperature},
                       {"prompt_key", params.prompt_key},
                       {"seed", params.seed}}},
                 {"prompt", prompt}};
    return RawTraceText{dispatch(spec_, payload.dump())};
  }

 private:
  AdapterSpec spec_;
  const TemplateRegistry& templates_;
};

class TransportJudge final : public JudgeClient {
 public:
  TransportJudge(AdapterSpec spec, const TemplateRegistry& templates)
      : spec_(std::move(spec)), templates_(templates) {}

  PrincipleSet decompose(const EditContext& ctx) override {
    std::string prompt =
        render_template(templates_.get("decompose"),
                        {{"EDIT_INSTRUCTION", ctx.instruction}});
    json payload{{"v", 1},
                 {"task", "decompose"},
                 {"context", json::parse(encode(ctx))},
                 {"prompt", prompt}};
    std::string reply = dispatch(spec_, payload.dump());
    json j = json::parse(reply, nullptr, false);
    if (j.is_discarded() || !j.is_array())
      throw Error(Errc::parse_error,
                  "decompose reply is not a JSON array from " +
                      transport_name(spec_));
    PrincipleSet set;
    set.context_id = context_key(ctx);
    int index = 0;
    for (const auto& e : j) {
      if (!e.is_object() || !e.contains("question") || !e.contains("category"))
        throw Error(Errc::parse_error,
                    "decompose reply entries need question and category");
      Principle p;
      char id[16];
      std::snprintf(id, sizeof(id), "p%02d", ++index);
      p.id = id;
      p.text = e.at("question").get<std::string>();
      p.category = category_from_name(e.at("category").get<std::string>());
      set.principles.push_back(std::move(p));
    }
    if (set.principles.empty())
      throw Error(Errc::empty_decomposition,
                  "decompose reply carried no principles");
    return set;
  }

  std::vector<PrincipleVerdict> verify(const Quadruple& quad,
                                       const ReasoningTrace& reference) override {
    std::string cot;
    try {
      cot = emit_trace(reference, quad.principles).text;
    } catch (const Error&) {
      cot = reference.think_text;  // reference without aligned verdicts
    }
    std::string prompt = render_template(
        templates_.get("verify"),
        {{"EDIT_INSTRUCTION", quad.context.instruction},
         {"QUESTION_POINTS", numbered_points(quad.principles)},
         {"CoT", cot}});
    json payload{{"v", 1},
                 {"task", "verify"},
                 {"quadruple", json::parse(encode(quad))},
                 {"prompt", prompt}};
    std::string reply = dispatch(spec_, payload.dump());
    json j = json::parse(reply, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("gold") ||
        !j.at("gold").is_array())
      throw Error(Errc::parse_error,
                  "verify reply needs a top-level gold array from " +
                      transport_name(spec_));
    const json& gold = j.at("gold");
    if (gold.size() != quad.principles.size())
      throw Error(Errc::length_mismatch,
                  "verify reply carries " + std::to_string(gold.size()) +
                      " verdicts for " +
                      std::to_string(quad.principles.size()) + " principles");
    std::vector<PrincipleVerdict> out;
    out.reserve(gold.size());
    for (std::size_t k = 0; k < gold.size(); ++k) {
      const json& e = gold[k];
      if (!e.is_object() || !e.contains("gold"))
        throw Error(Errc::parse_error, "verify reply entry needs a gold field");
      if (!e.at("gold").is_number())
        throw Error(Errc::verdict_non_binary, "gold verdict is not a number");
      double value = e.at("gold").get<double>();
      if (value != 0.0 && value != 1.0)
        throw Error(Errc::verdict_non_binary,
                    "gold verdict must be 0 or 1, got " + format_double(value));
      PrincipleVerdict v;
      v.principle_id = quad.principles.principles[k].id;
      v.met = value == 1.0 ? 1 : 0;
      if (e.contains("reason") && e.at("reason").is_string())
        v.reason = e.at("reason").get<std::string>();
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  AdapterSpec spec_;
  const TemplateRegistry& templates_;
};

SyntheticWorld world_from_target(const std::string& target) {
  return decode_world(read_file(target));
}

}  // namespace

double AdapterSpec::option_or(const std::string& key, double fallback) const {
  auto it = options.find(key);
  if (it == options.end()) return fallback;
  return parse_option_double(key, it->second);
}

AdapterSpec AdapterSpec::parse(const std::string& text) {
  AdapterSpec spec;
  std::string rest = text;
  std::size_t colon = rest.find(':');
  if (colon == std::string::npos)
    throw Error(Errc::parse_error,
                "adapter spec needs kind:target, got: " + text);
  std::size_t eq = rest.find('=');
  if (eq != std::string::npos && eq < colon) {
    spec.name = rest.substr(0, eq);
    rest = rest.substr(eq + 1);
    colon = rest.find(':');
    if (colon == std::string::npos)
      throw Error(Errc::parse_error,
                  "adapter spec needs kind:target, got: " + text);
  }
  spec.kind = rest.substr(0, colon);
  std::string target = rest.substr(colon + 1);
  std::size_t query = target.find('?');
  if (query != std::string::npos) {
    std::string qs = target.substr(query + 1);
    target = target.substr(0, query);
    std::size_t pos = 0;
    while (pos < qs.size()) {
      std::size_t amp = qs.find('&', pos);
      std::string item = qs.substr(
          pos, amp == std::string::npos ? std::string::npos : amp - pos);
      std::size_t kv = item.find('=');
      if (kv == std::string::npos || kv == 0)
        throw Error(Errc::parse_error,
                    "adapter option needs key=value, got: " + item);
      spec.options[item.substr(0, kv)] = item.substr(kv + 1);
      if (amp == std::string::npos) break;
      pos = amp + 1;
    }
  }
  spec.target = target;
  if (spec.kind.empty() || spec.target.empty())
    throw Error(Errc::parse_error,
                "adapter spec needs kind:target, got: " + text);
  return spec;
}

std::string run_command_adapter(const std::string& command,
                                const std::string& payload,
                                double timeout_seconds) {
  const std::string payload_path = temp_payload_path();
  write_file(payload_path, payload);
  std::string shell_command;
  if (timeout_seconds > 0.0)
    shell_command += "timeout " + format_double(timeout_seconds) + " ";
  shell_command += command + " < '" + payload_path + "'";

  FILE* pipe = popen(shell_command.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(payload_path);
    throw Error(Errc::adapter_error, "cannot launch command: " + command);
  }
  std::string output;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
  int status = pclose(pipe);
  std::filesystem::remove(payload_path);
  if (status != 0)
    throw Error(Errc::adapter_error,
                "command exited with status " + std::to_string(status) + ": " +
                    command);
  return output;
}

std::string run_http_adapter(const std::string& url, const std::string& payload,
                             double timeout_seconds) {
  UrlParts parts = split_url(url);
  httplib::Client client(parts.base);
  auto seconds = static_cast<time_t>(timeout_seconds);
  auto micros = static_cast<time_t>((timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  httplib::Result result = client.Post(parts.path, payload, "application/json");
  if (!result)
    throw Error(Errc::adapter_error,
                "http request failed: " + url + " (" +
                    httplib::to_string(result.error()) + ")");
  if (result->status < 200 || result->status >= 300)
    throw Error(Errc::adapter_error,
                "http status " + std::to_string(result->status) + " from " + url);
  return result->body;
}

std::unique_ptr<ScorerClient> make_transport_scorer(
    const AdapterSpec& spec, const TemplateRegistry& templates) {
  if (spec.kind == "stub") {
    auto seed = static_cast<std::uint64_t>(spec.option_or("seed", 0.0));
    return std::make_unique<StubScorer>(world_from_target(spec.target),
                                        transport_name(spec), seed);
  }
  if (spec.kind == "cmd" || spec.kind == "http")
    return std::make_unique<TransportScorer>(spec, templates);
  throw Error(Errc::adapter_error, "unsupported scorer kind: " + spec.kind);
}

std::unique_ptr<JudgeClient> make_transport_judge(
    const AdapterSpec& spec, const TemplateRegistry& templates) {
  if (spec.kind == "stub")
    return std::make_unique<StubJudge>(world_from_target(spec.target));
  if (spec.kind == "cmd" || spec.kind == "http")
    return std::make_unique<TransportJudge>(spec, templates);
  throw Error(Errc::adapter_error, "unsupported judge kind: " + spec.kind);
}

}  // namespace prefforge
