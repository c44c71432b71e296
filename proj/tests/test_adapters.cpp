#include <doctest.h>

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "oracles.hpp"
#include "prefforge/adapters.hpp"
#include "prefforge/errors.hpp"
#include "prefforge/templates.hpp"
#include "prefforge/toylab.hpp"
#include "prefforge/trace_protocol.hpp"
#include "prefforge/util.hpp"

using namespace prefforge;
using nlohmann::json;
using prefforge::testing::error_code_of;
using prefforge::testing::TempDir;

namespace {

Quadruple adapter_quad() {
  Quadruple quad;
  quad.context = {"ref-77", "recolor the door and then blur the window"};
  quad.edited_sample = "edit-77";
  quad.principles.context_id = context_key(quad.context);
  const char* texts[] = {"Is the door recolored?", "Is the window blurred?",
                         "Is the wall unchanged?"};
  PrincipleCategory cats[] = {PrincipleCategory::Follow,
                              PrincipleCategory::Follow,
                              PrincipleCategory::Keep};
  for (int k = 0; k < 3; ++k) {
    Principle p;
    p.id = "p0" + std::to_string(k + 1);
    p.text = texts[k];
    p.category = cats[k];
    quad.principles.principles.push_back(std::move(p));
  }
  return quad;
}

std::string canned_wire_text(const Quadruple& quad) {
  ReasoningTrace trace;
  trace.think_text = "checked the door and the window";
  for (const Principle& p : quad.principles.principles) {
    PrincipleVerdict v;
    v.principle_id = p.id;
    v.met = 1;
    trace.verdicts.push_back(std::move(v));
  }
  trace.average_score = 1.0;
  trace.final_score = 9.0;
  return emit_trace(trace, quad.principles).text;
}

// A cmd adapter that ignores stdin and prints a canned reply file.
AdapterSpec cat_reply_spec(const std::string& reply_path,
                           const std::string& reply) {
  write_file(reply_path, reply);
  return AdapterSpec::parse("cmd:cat " + reply_path);
}

}  // namespace

TEST_CASE("adapter specs parse names, kinds, targets and options") {
  SUBCASE("bare kind:target") {
    AdapterSpec spec = AdapterSpec::parse("stub:/data/world.json");
    CHECK(spec.name.empty());
    CHECK(spec.kind == "stub");
    CHECK(spec.target == "/data/world.json");
    CHECK(spec.options.empty());
  }
  SUBCASE("leading name=") {
    AdapterSpec spec = AdapterSpec::parse("judge=cmd:python3 judge.py --fast");
    CHECK(spec.name == "judge");
    CHECK(spec.kind == "cmd");
    CHECK(spec.target == "python3 judge.py --fast");
  }
  SUBCASE("urls keep their scheme colon and port") {
    AdapterSpec spec =
        AdapterSpec::parse("http:http://localhost:8080/score?timeout=5&tag=a");
    CHECK(spec.kind == "http");
    CHECK(spec.target == "http://localhost:8080/score");
    CHECK(spec.options.at("timeout") == "5");
    CHECK(spec.options.at("tag") == "a");
  }
  SUBCASE("an equals sign after the colon is part of the target") {
    AdapterSpec spec = AdapterSpec::parse("cmd:env MODE=fast scorer");
    CHECK(spec.name.empty());
    CHECK(spec.target == "env MODE=fast scorer");
  }
  SUBCASE("option_or parses numbers and falls back") {
    AdapterSpec spec = AdapterSpec::parse("cmd:cat?timeout=2.5");
    CHECK(spec.option_or("timeout", 9.0) == 2.5);
    CHECK(spec.option_or("retries", 3.0) == 3.0);
    AdapterSpec bad = AdapterSpec::parse("cmd:cat?timeout=soon");
    CHECK(error_code_of([&] { bad.option_or("timeout", 0.0); }) ==
          Errc::config_parse);
  }
  SUBCASE("malformed specs are rejected") {
    CHECK(error_code_of([] { AdapterSpec::parse("just-a-command"); }) ==
          Errc::parse_error);
    CHECK(error_code_of([] { AdapterSpec::parse("name=stub"); }) ==
          Errc::parse_error);
    CHECK(error_code_of([] { AdapterSpec::parse(":target"); }) ==
          Errc::parse_error);
    CHECK(error_code_of([] { AdapterSpec::parse("cmd:"); }) ==
          Errc::parse_error);
    CHECK(error_code_of([] { AdapterSpec::parse("cmd:cat?timeout"); }) ==
          Errc::parse_error);
    CHECK(error_code_of([] { AdapterSpec::parse("cmd:cat?=5"); }) ==
          Errc::parse_error);
  }
}

TEST_CASE("run_command_adapter pipes the payload through the command") {
  CHECK(run_command_adapter("cat", "hello adapter") == "hello adapter");
  CHECK(run_command_adapter("tr a-z A-Z", "quiet") == "QUIET");
  SUBCASE("nonzero exits become adapter errors") {
    CHECK(error_code_of([] { run_command_adapter("false", ""); }) ==
          Errc::adapter_error);
  }
  SUBCASE("timeouts kill slow commands") {
    CHECK(error_code_of([] { run_command_adapter("sleep 5", "", 0.2); }) ==
          Errc::adapter_error);
  }
}

TEST_CASE("transport scorers post a versioned payload and return the reply") {
  Quadruple quad = adapter_quad();
  TemplateRegistry templates = TemplateRegistry::with_defaults();
  SamplingParams params;
  params.temperature = 0.4;
  params.seed = 12;

  SUBCASE("payload structure, observed by echoing it back") {
    AdapterSpec spec = AdapterSpec::parse("cmd:cat");
    std::unique_ptr<ScorerClient> scorer = make_transport_scorer(spec, templates);
    CHECK(scorer->id() == "cmd:cat");
    RawTraceText reply = scorer->score(quad, params);
    json payload = json::parse(reply.text);
    CHECK(payload.at("v") == 1);
    CHECK(payload.at("task") == "score");
    CHECK(payload.at("sampling").at("temperature") == 0.4);
    CHECK(payload.at("sampling").at("prompt_key") == "score");
    CHECK(payload.at("sampling").at("seed") == 12);
    CHECK(payload.at("quadruple").at("edited_sample") == "edit-77");
    const std::string prompt = payload.at("prompt").get<std::string>();
    CHECK(prompt.find(quad.context.instruction) != std::string::npos);
    CHECK(prompt.find("1. Is the door recolored?") != std::string::npos);
    CHECK(prompt.find("3. Is the wall unchanged?") != std::string::npos);
  }

  SUBCASE("a canned reply parses as a trace") {
    TempDir tmp;
    AdapterSpec spec = cat_reply_spec(tmp.file("reply.txt"),
                                      canned_wire_text(quad));
    std::unique_ptr<ScorerClient> scorer = make_transport_scorer(spec, templates);
    ParsedTrace parsed = parse_trace(scorer->score(quad, params), quad.principles);
    CHECK(parsed.final_score == 9.0);
    CHECK(parsed.verdicts.size() == 3);
  }

  SUBCASE("named specs use the name as the scorer id") {
    AdapterSpec spec = AdapterSpec::parse("fast=cmd:cat");
    CHECK(make_transport_scorer(spec, templates)->id() == "fast");
  }

  SUBCASE("a failing command surfaces as adapter_error") {
    AdapterSpec spec = AdapterSpec::parse("cmd:false");
    std::unique_ptr<ScorerClient> scorer = make_transport_scorer(spec, templates);
    CHECK(error_code_of([&] { scorer->score(quad, params); }) ==
          Errc::adapter_error);
  }
}

TEST_CASE("transport judges decode decompose and verify replies") {
  Quadruple quad = adapter_quad();
  TemplateRegistry templates = TemplateRegistry::with_defaults();
  TempDir tmp;

  SUBCASE("decompose builds an ordered principle set") {
    json reply = json::array({
        json{{"question", "Is the door recolored?"}, {"category", "Follow"}},
        json{{"question", "Is the lighting natural?"},
             {"category", "Image Quality"}},
        json{{"question", "Is the cat still present?"},
             {"category", "Feature Preservation"}},
    });
    AdapterSpec spec = cat_reply_spec(tmp.file("decompose.json"), reply.dump());
    std::unique_ptr<JudgeClient> judge = make_transport_judge(spec, templates);
    PrincipleSet set = judge->decompose(quad.context);
    REQUIRE(set.principles.size() == 3);
    CHECK(set.context_id == context_key(quad.context));
    CHECK(set.principles[0].id == "p01");
    CHECK(set.principles[0].category == PrincipleCategory::Follow);
    CHECK(set.principles[1].category == PrincipleCategory::Quality);
    CHECK(set.principles[2].category == PrincipleCategory::Keep);
    CHECK(set.principles[2].text == "Is the cat still present?");
  }

  SUBCASE("decompose rejects unusable replies") {
    std::unique_ptr<JudgeClient> not_array = make_transport_judge(
        cat_reply_spec(tmp.file("r1.json"), "{\"oops\": 1}"), templates);
    CHECK(error_code_of([&] { not_array->decompose(quad.context); }) ==
          Errc::parse_error);
    std::unique_ptr<JudgeClient> missing_field = make_transport_judge(
        cat_reply_spec(tmp.file("r2.json"), "[{\"question\": \"Q?\"}]"),
        templates);
    CHECK(error_code_of([&] { missing_field->decompose(quad.context); }) ==
          Errc::parse_error);
    std::unique_ptr<JudgeClient> empty = make_transport_judge(
        cat_reply_spec(tmp.file("r3.json"), "[]"), templates);
    CHECK(error_code_of([&] { empty->decompose(quad.context); }) ==
          Errc::empty_decomposition);
  }

  SUBCASE("verify aligns gold verdicts with the principle order") {
    json reply{{"gold", json::array({
                            json{{"question", "Is the door recolored?"},
                                 {"gold", 1},
                                 {"reason", "new paint visible"}},
                            json{{"question", "Is the window blurred?"},
                                 {"gold", 0}},
                            json{{"question", "Is the wall unchanged?"},
                                 {"gold", 1},
                                 {"reason", "texture intact"}},
                        })}};
    AdapterSpec spec = cat_reply_spec(tmp.file("verify.json"), reply.dump());
    std::unique_ptr<JudgeClient> judge = make_transport_judge(spec, templates);
    ReasoningTrace reference;
    reference.think_text = "looked closely";
    std::vector<PrincipleVerdict> gold = judge->verify(quad, reference);
    REQUIRE(gold.size() == 3);
    CHECK(gold[0].principle_id == "p01");
    CHECK(gold[0].met == 1);
    CHECK(gold[0].reason == "new paint visible");
    CHECK(gold[1].met == 0);
    CHECK(gold[1].reason.empty());
    CHECK(gold[2].met == 1);
  }

  SUBCASE("verify rejects wrong counts and non-binary verdicts") {
    ReasoningTrace reference;
    json short_reply{{"gold", json::array({json{{"gold", 1}}})}};
    std::unique_ptr<JudgeClient> short_judge = make_transport_judge(
        cat_reply_spec(tmp.file("v1.json"), short_reply.dump()), templates);
    CHECK(error_code_of([&] { short_judge->verify(quad, reference); }) ==
          Errc::length_mismatch);

    json fractional{{"gold", json::array({json{{"gold", 1}}, json{{"gold", 0.5}},
                                          json{{"gold", 0}}})}};
    std::unique_ptr<JudgeClient> frac_judge = make_transport_judge(
        cat_reply_spec(tmp.file("v2.json"), fractional.dump()), templates);
    CHECK(error_code_of([&] { frac_judge->verify(quad, reference); }) ==
          Errc::verdict_non_binary);

    json textual{{"gold", json::array({json{{"gold", "yes"}}, json{{"gold", 1}},
                                       json{{"gold", 0}}})}};
    std::unique_ptr<JudgeClient> text_judge = make_transport_judge(
        cat_reply_spec(tmp.file("v3.json"), textual.dump()), templates);
    CHECK(error_code_of([&] { text_judge->verify(quad, reference); }) ==
          Errc::verdict_non_binary);

    std::unique_ptr<JudgeClient> no_gold = make_transport_judge(
        cat_reply_spec(tmp.file("v4.json"), "{\"verdicts\": []}"), templates);
    CHECK(error_code_of([&] { no_gold->verify(quad, reference); }) ==
          Errc::parse_error);
  }
}

TEST_CASE("http adapters post json and read the body back") {
  httplib::Server server;
  Quadruple quad = adapter_quad();
  const std::string wire = canned_wire_text(quad);
  std::string seen_body;
  server.Post("/echo", [&](const httplib::Request& req, httplib::Response& res) {
    res.set_content(req.body, "text/plain");
  });
  server.Post("/trace", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    res.set_content(wire, "text/plain");
  });
  server.Post("/fail", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread serve([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);

  CHECK(run_http_adapter(base + "/echo", "{\"ping\": 1}") == "{\"ping\": 1}");
  CHECK(error_code_of([&] { run_http_adapter(base + "/fail", "{}"); }) ==
        Errc::adapter_error);
  CHECK(error_code_of([&] { run_http_adapter(base + "/missing", "{}"); }) ==
        Errc::adapter_error);

  SUBCASE("a scorer rides the http transport end to end") {
    TemplateRegistry templates = TemplateRegistry::with_defaults();
    AdapterSpec spec = AdapterSpec::parse("remote=http:" + base + "/trace");
    std::unique_ptr<ScorerClient> scorer = make_transport_scorer(spec, templates);
    CHECK(scorer->id() == "remote");
    RawTraceText reply = scorer->score(quad, SamplingParams{});
    CHECK(reply.text == wire);
    json payload = json::parse(seen_body);
    CHECK(payload.at("task") == "score");
    CHECK(payload.at("quadruple").at("edited_sample") == "edit-77");
  }

  server.stop();
  serve.join();

  SUBCASE("https and other schemes are refused up front") {
    CHECK(error_code_of([] {
            run_http_adapter("https://example.test/score", "{}");
          }) == Errc::adapter_error);
    CHECK(error_code_of([] { run_http_adapter("ftp://example.test", "{}"); }) ==
          Errc::adapter_error);
  }
}

TEST_CASE("stub adapters load the synthetic world from the target file") {
  SyntheticWorld world = make_world({.samples = 6,
                                     .candidates_per_context = 3,
                                     .noise_sigma = 0.0,
                                     .same_margin = 0.5,
                                     .seed = 21});
  TempDir tmp;
  const std::string world_path = tmp.file("world.json");
  write_file(world_path, encode_world(world));
  TemplateRegistry templates = TemplateRegistry::with_defaults();

  AdapterSpec judge_spec = AdapterSpec::parse("stub:" + world_path);
  std::unique_ptr<JudgeClient> judge = make_transport_judge(judge_spec, templates);
  const EditContext& ctx = world.contexts[0].context;
  PrincipleSet set = judge->decompose(ctx);
  CHECK(set.size() == 10);

  AdapterSpec scorer_spec = AdapterSpec::parse("sw=stub:" + world_path);
  std::unique_ptr<ScorerClient> scorer =
      make_transport_scorer(scorer_spec, templates);
  CHECK(scorer->id() == "sw");
  Quadruple quad;
  quad.edited_sample = world.contexts[0].candidates[0];
  quad.context = ctx;
  quad.principles = set;
  SamplingParams cold;
  cold.temperature = 0.0;
  ParsedTrace parsed = parse_trace(scorer->score(quad, cold), quad.principles);
  CHECK(parsed.final_score ==
        doctest::Approx(world.latent_quality.at(quad.edited_sample)));

  SUBCASE("unsupported kinds are refused") {
    AdapterSpec bad = AdapterSpec::parse("grpc:somewhere");
    CHECK(error_code_of([&] { make_transport_scorer(bad, templates); }) ==
          Errc::adapter_error);
    CHECK(error_code_of([&] { make_transport_judge(bad, templates); }) ==
          Errc::adapter_error);
  }
}
