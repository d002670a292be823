#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "locoforge/config.hpp"

using namespace locoforge;
namespace fs = std::filesystem;

TEST_CASE("defaults survive a save/parse round trip") {
  RunConfig cfg;
  const std::string once = run_config_to_json(cfg);
  const RunConfig back = parse_run_config(once, "<mem>");
  const std::string twice = run_config_to_json(back);
  CHECK(once == twice);
}

TEST_CASE("load -> normalize -> save -> load is stable") {
  const char* partial = R"({
    "seed": 7,
    "env": {"task": "bounding", "stage": 2, "max_steps": 300},
    "rewards": {"k_bn": 3.5, "k_ti4": 2.25},
    "ppo": {"horizon": 64, "env_count": 4, "minibatch_size": 128}
  })";
  const RunConfig cfg = parse_run_config(partial, "<mem>");
  CHECK(cfg.seed == 7);
  CHECK(cfg.env.task == Task::Bounding);
  CHECK(cfg.env.stage == 2);
  CHECK(cfg.env.max_steps == 300);
  CHECK(cfg.env.tilt_limit == 1.2);  // bounding default applied
  CHECK(cfg.rewards.k_bn == 3.5);
  CHECK(cfg.rewards.k_ti[3] == 2.25);
  CHECK(cfg.ppo.horizon == 64);
  CHECK(cfg.ppo.seed == 7);
  CHECK(cfg.demo.task == Task::Bounding);  // synth demo follows the env task

  const std::string normalized = run_config_to_json(cfg);
  const RunConfig again = parse_run_config(normalized, "<mem>");
  CHECK(run_config_to_json(again) == normalized);
  CHECK(again.env.max_steps == 300);
  CHECK(again.rewards.k_bn == 3.5);
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"rewards": {"k_tt": 1.0, "k_tz": 2.0}})", "<m>"),
                       doctest::Contains("rewards.k_tz"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"sed": 3})", "<m>"),
                       doctest::Contains("sed"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"env": {"taks": "hopping"}})", "<m>"),
                       doctest::Contains("env.taks"), std::runtime_error);
}

TEST_CASE("malformed JSON and wrong types are reported") {
  CHECK_THROWS_WITH_AS(parse_run_config("{not json", "<m>"),
                       doctest::Contains("parse error"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"seed": "high"})", "<m>"),
                       doctest::Contains("seed"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"env": {"task": "swimming"}})", "<m>"),
                       doctest::Contains("swimming"), std::runtime_error);
}

TEST_CASE("validation runs every module invariant") {
  RunConfig cfg;
  cfg.rewards.z_base_min = 1.0;
  cfg.rewards.z_base_max = 0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = RunConfig{};
  cfg.demo.file = "/definitely/not/here.txt";
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("does not exist"),
                       std::runtime_error);

  cfg = RunConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config hash tracks content") {
  RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.rewards.k_hp = 11.0;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("resolve_demo honors file vs synthesis") {
  RunConfig cfg;
  const DemoTrajectory synth = resolve_demo(cfg.demo, cfg.model);
  CHECK(synth.task == Task::Hopping);
  CHECK(synth.cyclic);

  const std::string path = (fs::temp_directory_path() / "cfg_demo.txt").string();
  save_demo(synth, path);
  DemoSource src;
  src.file = path;
  const DemoTrajectory loaded = resolve_demo(src, cfg.model);
  CHECK(loaded.frame_count() == synth.frame_count());
  fs::remove(path);
}

TEST_CASE("manifest records hash, seed and build") {
  RunConfig cfg;
  cfg.seed = 99;
  const std::string dir = (fs::temp_directory_path() / "lf_manifest").string();
  fs::remove_all(dir);
  write_manifest(dir, cfg, "test");
  std::ifstream is(dir + "/manifest.json");
  REQUIRE(is.good());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(text.find(config_hash(cfg)) != std::string::npos);
  CHECK(text.find("99") != std::string::npos);
  CHECK(text.find("locoforge") != std::string::npos);
  fs::remove_all(dir);
}
