#include <doctest.h>

#include <string>

#include "oracles.hpp"
#include "prefforge/config.hpp"
#include "prefforge/util.hpp"

using namespace prefforge;
using prefforge::testing::error_code_of;

TEST_CASE("empty config text keeps the documented defaults") {
  const RunConfig cfg = parse_config("");
  CHECK(cfg.optimizer.clip_epsilon == 0.2);
  CHECK(cfg.optimizer.group_size == 24);
  CHECK(cfg.optimizer.kl_beta == 0.04);
  CHECK(cfg.optimizer.std_epsilon == 1e-8);
  CHECK(cfg.steps == 200);
  CHECK(cfg.out_dir == "runs/default");
  CHECK(cfg == RunConfig{});
}

TEST_CASE("sections, comments, and blank lines parse") {
  const RunConfig cfg = parse_config(
      "# optimizer block\n"
      "[optimizer]\n"
      "clip_epsilon = 0.1\n"
      "group_size=8\n"
      "; semicolon comment\n"
      "\n"
      "[run]\n"
      "steps = 50\n"
      "out_dir = runs/exp1\n"
      "[policy]\n"
      "temperature = 0.5\n");
  CHECK(cfg.optimizer.clip_epsilon == 0.1);
  CHECK(cfg.optimizer.group_size == 8);
  CHECK(cfg.steps == 50);
  CHECK(cfg.out_dir == "runs/exp1");
  CHECK(cfg.temperature == 0.5);
  CHECK(cfg.optimizer.kl_beta == 0.04);  // untouched default
}

TEST_CASE("overrides beat file values") {
  RunConfig cfg = parse_config("[optimizer]\nclip_epsilon = 0.3\n");
  CHECK(cfg.optimizer.clip_epsilon == 0.3);
  apply_override(cfg, "optimizer.clip_epsilon=0.1");
  CHECK(cfg.optimizer.clip_epsilon == 0.1);
  apply_overrides(cfg, {"run.steps=7", "gcpo.batch_pairs=4"});
  CHECK(cfg.steps == 7);
  CHECK(cfg.batch_pairs == 4);
}

TEST_CASE("unknown keys are rejected, not ignored") {
  CHECK(error_code_of([] {
          parse_config("[optimizer]\nclip_epsilonn = 0.1\n");
        }) == Errc::unknown_key);
  CHECK(error_code_of([] { parse_config("[mystery]\nx = 1\n"); }) ==
        Errc::unknown_key);
  RunConfig cfg;
  CHECK(error_code_of([&] { apply_override(cfg, "optimizer.clip=0.1"); }) ==
        Errc::unknown_key);
}

TEST_CASE("malformed lines and values raise config_parse with a location") {
  try {
    parse_config("[optimizer]\nclip_epsilon = fast\n");
    FAIL("expected Error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config_parse);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK(error_code_of([] { parse_config("[optimizer\nx=1\n"); }) ==
        Errc::config_parse);
  CHECK(error_code_of([] { parse_config("key = 1\n"); }) ==
        Errc::config_parse);  // key before any section
  CHECK(error_code_of([] { parse_config("[run]\n= 3\n"); }) ==
        Errc::config_parse);
  CHECK(error_code_of([] { parse_config("[run]\nsteps\n"); }) ==
        Errc::config_parse);
  RunConfig cfg;
  CHECK(error_code_of([&] { apply_override(cfg, "steps=3"); }) ==
        Errc::config_parse);  // overrides need section.key
  CHECK(error_code_of([&] {
          apply_override(cfg, "optimizer.group_size=2.5");
        }) == Errc::config_parse);
}

TEST_CASE("numeric values reject trailing junk and non-finite floats") {
  CHECK(error_code_of([] { parse_config("[run]\nsteps = 3x\n"); }) ==
        Errc::config_parse);
  CHECK(error_code_of([] { parse_config("[gcpo]\ntie_delta = inf\n"); }) ==
        Errc::config_parse);
}

TEST_CASE("encode_config round-trips a fully customized config") {
  RunConfig cfg;
  cfg.optimizer.group_size = 6;
  cfg.optimizer.clip_epsilon = 0.15;
  cfg.optimizer.kl_beta = 0.0;
  cfg.optimizer.std_epsilon = 1e-6;
  cfg.optimizer.learning_rate = 0.5;
  cfg.optimizer.seed = -12;
  cfg.steps = 33;
  cfg.eval_every = 5;
  cfg.parallelism = 3;
  cfg.out_dir = "runs/custom";
  cfg.batch_pairs = 9;
  cfg.tie_delta = 0.25;
  cfg.floor_score = 1.0;
  cfg.floor_reward = -1.0;
  cfg.temperature = 0.7;
  cfg.init_seed = 99;
  cfg.init_scale = 0.0;
  CHECK(parse_config(encode_config(cfg)) == cfg);
}

TEST_CASE("load_config_file reads from disk") {
  testing::TempDir tmp;
  const std::string path = tmp.file("run.ini");
  write_file(path, "[run]\nsteps = 12\n");
  CHECK(load_config_file(path).steps == 12);
  CHECK(error_code_of([&] { load_config_file(tmp.file("nope.ini")); }) ==
        Errc::io_error);
}
