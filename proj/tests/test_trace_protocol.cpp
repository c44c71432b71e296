#include <doctest.h>

#include <string>

#include "oracles.hpp"
#include "prefforge/domain.hpp"
#include "prefforge/trace_protocol.hpp"

using namespace prefforge;
using prefforge::testing::error_code_of;

namespace {

PrincipleSet two_principles() {
  PrincipleSet set;
  set.context_id = "c1";
  set.principles = {
      {"p01", "Is the hat removed?", PrincipleCategory::Follow},
      {"p02", "Is the face unchanged?", PrincipleCategory::Keep},
  };
  return set;
}

}  // namespace

TEST_CASE("extract_score reads the last complete tag") {
  CHECK(extract_score({"ok <score>7</score>"}).value == 7.0);
  CHECK(extract_score({"<score>3</score> then <score>9.5</score>"}).value ==
        9.5);
  CHECK(extract_score({"<score>4<\\score>"}).value == 4.0);
  CHECK(extract_score({"<score>1</score><score>2<\\score>"}).value == 2.0);
}

TEST_CASE("extract_score clamps out-of-range values and flags it") {
  const ScoreExtraction high = extract_score({"<score>15</score>"});
  CHECK(high.value == 10.0);
  CHECK(high.clamped);
  const ScoreExtraction low = extract_score({"<score>-2</score>"});
  CHECK(low.value == 0.0);
  CHECK(low.clamped);
  CHECK(!extract_score({"<score>10</score>"}).clamped);
}

TEST_CASE("extract_score failure modes") {
  CHECK(error_code_of([] { extract_score({"no tag here"}); }) ==
        Errc::score_missing);
  CHECK(error_code_of([] { extract_score({"<score>7"}); }) ==
        Errc::score_missing);
  CHECK(error_code_of([] { extract_score({"<score>seven</score>"}); }) ==
        Errc::score_unparseable);
  CHECK(error_code_of([] { extract_score({"<score>7 ish</score>"}); }) ==
        Errc::score_unparseable);
  CHECK(error_code_of([] { extract_score({"<score>nan</score>"}); }) ==
        Errc::score_unparseable);
  // An unparsable LAST tag is not rescued by an earlier good one.
  CHECK(error_code_of([] {
          extract_score({"<score>7</score><score>x</score>"});
        }) == Errc::score_unparseable);
}

TEST_CASE("parse_verdicts aligns by question text") {
  const PrincipleSet set = two_principles();
  const RawTraceText raw{
      R"([{"question": "Is the hat removed?", "score": 1},)"
      R"( {"question": "Is the face unchanged?", "score": 0}])"
      R"(, {"average_score": 0.5} <score>5</score>)"};
  const auto verdicts = parse_verdicts(raw, set);
  REQUIRE(verdicts.size() == 2);
  CHECK(verdicts[0].principle_id == "p01");
  CHECK(verdicts[0].met == 1);
  CHECK(verdicts[1].principle_id == "p02");
  CHECK(verdicts[1].met == 0);
}

TEST_CASE("parse_verdicts falls back to normalized question matching") {
  const PrincipleSet set = two_principles();
  const RawTraceText raw{
      R"([{"question": "  is THE hat  removed? ", "score": 0},)"
      R"( {"question": "IS THE FACE UNCHANGED?", "score": 1}])"};
  const auto verdicts = parse_verdicts(raw, set);
  REQUIRE(verdicts.size() == 2);
  CHECK(verdicts[0].met == 0);
  CHECK(verdicts[1].met == 1);
}

TEST_CASE("parse_verdicts consumes each entry at most once") {
  PrincipleSet set = two_principles();
  set.principles[1].text = set.principles[0].text;  // duplicate question
  const RawTraceText raw{
      R"([{"question": "Is the hat removed?", "score": 1},)"
      R"( {"question": "Is the hat removed?", "score": 0}])"};
  const auto verdicts = parse_verdicts(raw, set);
  REQUIRE(verdicts.size() == 2);
  CHECK(verdicts[0].met == 1);
  CHECK(verdicts[1].met == 0);
}

TEST_CASE("parse_verdicts failure modes") {
  const PrincipleSet set = two_principles();
  SUBCASE("missing principle is named") {
    const RawTraceText raw{
        R"([{"question": "Is the hat removed?", "score": 1}])"};
    try {
      parse_verdicts(raw, set);
      FAIL("expected Error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::verdict_missing);
      CHECK(std::string(e.what()).find("p02") != std::string::npos);
    }
  }
  SUBCASE("fractional score") {
    const RawTraceText raw{
        R"([{"question": "Is the hat removed?", "score": 0.5},)"
        R"( {"question": "Is the face unchanged?", "score": 1}])"};
    CHECK(error_code_of([&] { parse_verdicts(raw, set); }) ==
          Errc::verdict_non_binary);
  }
  SUBCASE("no array at all") {
    CHECK(error_code_of([&] { parse_verdicts({"prose only"}, set); }) ==
          Errc::verdict_missing);
  }
}

TEST_CASE("emit_trace produces the canonical byte-exact wire format") {
  ReasoningTrace trace;
  trace.think_text = "hat gone, face intact";
  trace.verdicts = {{"p01", 1, ""}, {"p02", 0, "slight blur"}};
  trace.average_score = 0.5;
  trace.final_score = 6.0;
  trace.token_ids = {11, 6};
  trace.token_logprobs_current = {0.0, -0.5};
  trace.token_logprobs_old = {0.0, -0.5};

  const RawTraceText raw = emit_trace(trace, two_principles());
  CHECK(raw.text ==
        "hat gone, face intact\n"
        "[{\"question\": \"Is the hat removed?\", \"score\": 1}, "
        "{\"question\": \"Is the face unchanged?\", \"score\": 0, "
        "\"reason\": \"slight blur\"}], {\"average_score\": 0.5} "
        "<score>6</score>");
}

TEST_CASE("emitted traces re-parse to identical verdicts and scores") {
  ReasoningTrace trace;
  trace.think_text = "both satisfied";
  trace.verdicts = {{"p01", 1, ""}, {"p02", 1, ""}};
  trace.average_score = 1.0;
  trace.final_score = 9.0;
  trace.token_ids = {9};
  trace.token_logprobs_current = {-0.1};
  trace.token_logprobs_old = {-0.1};

  const PrincipleSet set = two_principles();
  const ParsedTrace back = parse_trace(emit_trace(trace, set), set);
  CHECK(back.verdicts == trace.verdicts);
  CHECK(back.average_score == trace.average_score);
  CHECK(back.final_score == trace.final_score);
  CHECK(back.think_text == trace.think_text);
}

TEST_CASE("emit_trace rejects verdict/principle shape mismatches") {
  ReasoningTrace trace;
  trace.verdicts = {{"p01", 1, ""}};
  trace.average_score = 1.0;
  trace.final_score = 10.0;
  trace.token_ids = {10};
  trace.token_logprobs_current = {0.0};
  trace.token_logprobs_old = {0.0};
  CHECK(error_code_of([&] { emit_trace(trace, two_principles()); }) ==
        Errc::shape_mismatch);
}

TEST_CASE("parser tolerates decoy arrays and nested JSON in reasons") {
  const PrincipleSet set = two_principles();
  const RawTraceText raw{
      "thinking [1, 2, 3] about {\"average_score\": 0.1} options\n"
      R"([{"question": "Is the hat removed?", "score": 1, "reason": "used [brackets] and \"quotes\" {here}"},)"
      R"( {"question": "Is the face unchanged?", "score": 1}])"
      R"(, {"average_score": 1} <score>8</score>)"};
  const ParsedTrace parsed = parse_trace(raw, set);
  CHECK(parsed.verdicts[0].reason ==
        "used [brackets] and \"quotes\" {here}");
  CHECK(parsed.average_score == 1.0);
  CHECK(parsed.final_score == 8.0);
  CHECK(parsed.think_text.find("thinking") == 0);
}

TEST_CASE("average score is recomputed from the verdicts, not trusted") {
  const PrincipleSet set = two_principles();
  const RawTraceText raw{
      R"([{"question": "Is the hat removed?", "score": 1},)"
      R"( {"question": "Is the face unchanged?", "score": 1}])"
      R"(, {"average_score": 0.25} <score>8</score>)"};
  CHECK(parse_trace(raw, set).average_score == 1.0);
}

TEST_CASE("trace_from_text builds a valid placeholder trace") {
  const PrincipleSet set = two_principles();
  const RawTraceText raw{
      "some prose here\n"
      R"([{"question": "Is the hat removed?", "score": 1},)"
      R"( {"question": "Is the face unchanged?", "score": 0}])"
      R"(, {"average_score": 0.5} <score>5</score>)"};
  const ReasoningTrace trace = trace_from_text(raw, set);
  CHECK(trace.final_score == 5.0);
  CHECK(trace.average_score == 0.5);
  CHECK(trace.length() == approximate_token_count(raw.text));
  for (double lp : trace.token_logprobs_current) CHECK(lp == 0.0);
}

TEST_CASE("score_or_floor never throws") {
  CHECK(score_or_floor({"<score>7</score>"}, 0.0) == 7.0);
  CHECK(score_or_floor({"garbage"}, 0.0) == 0.0);
  CHECK(score_or_floor({"garbage"}, 2.5) == 2.5);
  CHECK(score_or_floor({"<score>bad</score>"}, 1.0) == 1.0);
}

TEST_CASE("approximate_token_count floors at one") {
  CHECK(approximate_token_count("") == 1);
  CHECK(approximate_token_count("one") == 1);
  CHECK(approximate_token_count("a b  c\nd") == 4);
}
