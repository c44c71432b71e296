#include <doctest.h>

#include "oracles.hpp"
#include "prefforge/domain.hpp"
#include "prefforge/errors.hpp"

using namespace prefforge;
using prefforge::testing::error_code_of;

namespace {

Quadruple make_quad(const std::string& edited = "s01") {
  Quadruple quad;
  quad.edited_sample = edited;
  quad.context = {"r01", "remove the hat"};
  quad.principles.context_id = context_key(quad.context);
  quad.principles.principles = {
      {"p01", "Is the hat removed?", PrincipleCategory::Follow},
      {"p02", "Is the face unchanged?", PrincipleCategory::Keep},
  };
  return quad;
}

ReasoningTrace make_trace() {
  ReasoningTrace trace;
  trace.think_text = "check both points";
  trace.verdicts = {{"p01", 1, ""}, {"p02", 0, "blurred"}};
  trace.average_score = 0.5;
  trace.final_score = 6.0;
  trace.token_ids = {11, 11, 6};
  trace.token_logprobs_current = {0.0, 0.0, -1.2};
  trace.token_logprobs_old = {0.0, 0.0, -1.2};
  return trace;
}

}  // namespace

TEST_CASE("category names round-trip and accept long-form labels") {
  CHECK(category_name(PrincipleCategory::Keep) == "Keep");
  CHECK(category_from_name("Keep") == PrincipleCategory::Keep);
  CHECK(category_from_name("Feature  Preservation") == PrincipleCategory::Keep);
  CHECK(category_from_name("instruction following") ==
        PrincipleCategory::Follow);
  CHECK(category_from_name("Image Quality") == PrincipleCategory::Quality);
  CHECK(error_code_of([] { category_from_name("style"); }) ==
        Errc::parse_error);
}

TEST_CASE("preference labels round-trip with aliases") {
  CHECK(label_name(PreferenceLabel::WinnerRight) == "winner_right");
  CHECK(label_from_name("winner_left") == PreferenceLabel::WinnerLeft);
  CHECK(label_from_name("LEFT") == PreferenceLabel::WinnerLeft);
  CHECK(label_from_name("tie") == PreferenceLabel::Same);
  CHECK(error_code_of([] { label_from_name("draw"); }) == Errc::parse_error);
}

TEST_CASE("context and quadruple keys are stable content hashes") {
  const EditContext ctx{"r01", "remove the hat"};
  CHECK(context_key(ctx) == context_key(ctx));
  CHECK(context_key(ctx) != context_key({"r01", "remove the cat"}));
  CHECK(context_key(ctx) != context_key({"r02", "remove the hat"}));
  CHECK(context_key(ctx).front() == 'c');

  const Quadruple a = make_quad("s01");
  const Quadruple b = make_quad("s02");
  CHECK(quadruple_key(a) != quadruple_key(b));
  CHECK(quadruple_key(a).front() == 'q');
}

TEST_CASE("quadruple validation ties principles to the context key") {
  Quadruple quad = make_quad();
  CHECK_NOTHROW(validate(quad));
  quad.principles.context_id = "c0";
  CHECK(error_code_of([&] { validate(quad); }) == Errc::invariant_violation);
}

TEST_CASE("principle set validation rejects duplicates and empties") {
  PrincipleSet set;
  CHECK(error_code_of([&] { validate(set); }) == Errc::invariant_violation);
  set.principles = {{"p01", "q?", PrincipleCategory::Follow},
                    {"p01", "q2?", PrincipleCategory::Keep}};
  CHECK(error_code_of([&] { validate(set); }) == Errc::invariant_violation);
  set.principles[1].id = "p02";
  CHECK_NOTHROW(validate(set));
}

TEST_CASE("trace validation enforces the verdict-average coupling") {
  ReasoningTrace trace = make_trace();
  CHECK_NOTHROW(validate(trace));

  SUBCASE("average must equal (sum met)/K") {
    trace.average_score = 0.75;
    CHECK(error_code_of([&] { validate(trace); }) ==
          Errc::invariant_violation);
  }
  SUBCASE("final score range") {
    trace.final_score = 10.5;
    CHECK(error_code_of([&] { validate(trace); }) ==
          Errc::invariant_violation);
  }
  SUBCASE("verdicts must be binary") {
    trace.verdicts[0].met = 2;
    CHECK(error_code_of([&] { validate(trace); }) ==
          Errc::invariant_violation);
  }
  SUBCASE("token tracks must align") {
    trace.token_logprobs_old.pop_back();
    CHECK(error_code_of([&] { validate(trace); }) ==
          Errc::invariant_violation);
  }
  SUBCASE("log-probabilities cannot be positive") {
    trace.token_logprobs_current[2] = 0.3;
    CHECK(error_code_of([&] { validate(trace); }) ==
          Errc::invariant_violation);
  }
  SUBCASE("tokens must exist") {
    trace.token_ids.clear();
    trace.token_logprobs_current.clear();
    trace.token_logprobs_old.clear();
    CHECK(error_code_of([&] { validate(trace); }) ==
          Errc::invariant_violation);
  }
}

TEST_CASE("pair validation requires matching contexts and distinct sides") {
  PreferencePair pair;
  pair.context = {"r01", "remove the hat"};
  pair.winner = make_quad("s01");
  pair.loser = make_quad("s02");
  CHECK_NOTHROW(validate(pair));

  SUBCASE("side context must equal the pair context") {
    pair.winner.context.instruction = "other";
    pair.winner.principles.context_id = context_key(pair.winner.context);
    CHECK(error_code_of([&] { validate(pair); }) == Errc::invariant_violation);
  }
  SUBCASE("the two sides cannot be one sample") {
    pair.loser = make_quad("s01");
    CHECK(error_code_of([&] { validate(pair); }) == Errc::invariant_violation);
  }
}

TEST_CASE("rollout group stats must align with traces when populated") {
  RolloutGroup group;
  group.sample = make_quad();
  group.traces = {make_trace(), make_trace()};
  CHECK_NOTHROW(validate(group));
  group.scores = {1.0, 2.0};
  CHECK_NOTHROW(validate(group));
  group.scores = {1.0};
  CHECK(error_code_of([&] { validate(group); }) == Errc::invariant_violation);
}

TEST_CASE("optimizer config bounds") {
  OptimizerConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  CHECK(cfg.group_size == 24);
  CHECK(cfg.kl_beta == 0.04);

  SUBCASE("group size") {
    cfg.group_size = 1;
    CHECK(error_code_of([&] { validate(cfg); }) == Errc::invariant_violation);
  }
  SUBCASE("clip range") {
    cfg.clip_epsilon = 1.0;
    CHECK(error_code_of([&] { validate(cfg); }) == Errc::invariant_violation);
  }
  SUBCASE("negative KL weight") {
    cfg.kl_beta = -0.1;
    CHECK(error_code_of([&] { validate(cfg); }) == Errc::invariant_violation);
  }
  SUBCASE("zero std epsilon") {
    cfg.std_epsilon = 0.0;
    CHECK(error_code_of([&] { validate(cfg); }) == Errc::invariant_violation);
  }
}
