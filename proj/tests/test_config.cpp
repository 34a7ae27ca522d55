#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "locoman/config.hpp"
#include "locoman/metrics.hpp"

using namespace locoman;

TEST_CASE("defaults parse, serialize and round-trip exactly") {
  RunConfig cfg;
  const std::string text = cfg.serialize();
  const RunConfig back = RunConfig::parse(text);
  CHECK(back.serialize() == text);
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("unknown keys and type mismatches fail fast") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("bogus.key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("ppo.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("ppo.epochs", "2.5"), ConfigError);
  CHECK_THROWS_AS(cfg.set("env.vision", "maybe"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("nonsense line\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("made.up = 3\n"), ConfigError);
}

TEST_CASE("overrides and typed accessors") {
  RunConfig cfg;
  cfg.apply_override("ppo.lr=0.001");
  cfg.apply_override("env.vision=true");
  cfg.apply_override("train.updates=7");
  CHECK(cfg.real("ppo.lr") == doctest::Approx(0.001));
  CHECK(cfg.boolean("env.vision"));
  CHECK(cfg.integer("train.updates") == 7);
  CHECK_THROWS_AS(cfg.apply_override("no-equals-sign"), ConfigError);

  // hash changes with content
  RunConfig base;
  CHECK(base.hash() != cfg.hash());
}

TEST_CASE("comments and blank lines are accepted") {
  const RunConfig cfg = RunConfig::parse("# comment\n\nppo.lr = 0.0005\n");
  CHECK(cfg.real("ppo.lr") == doctest::Approx(0.0005));
}

TEST_CASE("manifest records hash, version and seed") {
  RunConfig cfg;
  cfg.set("run.seed", "42");
  const std::string dir = "/tmp/locoman_manifest_test";
  std::filesystem::remove_all(dir);
  write_manifest(dir, cfg, 42, "eval");
  std::ifstream in(dir + "/manifest.json");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line.find("\"seed\":42") != std::string::npos);
  CHECK(line.find("config_hash") != std::string::npos);
  CHECK(line.find(kCodeVersion) != std::string::npos);
  // the config written beside the manifest reproduces the hash
  const RunConfig reloaded = RunConfig::load(dir + "/config.txt");
  CHECK(reloaded.hash() == cfg.hash());
}

TEST_CASE("json lines have deterministic key order and formatting") {
  const MetricRow row{{"b", 1.5}, {"a", std::string("x")}, {"c", true}, {"d", 7L}};
  CHECK(to_json_line(row) == "{\"a\":\"x\",\"b\":1.5,\"c\":true,\"d\":7}");
}

TEST_CASE("svg chart writer emits polylines for every series") {
  const std::string path = "/tmp/locoman_chart_test.svg";
  write_svg_chart(path, "test", {0, 1, 2, 3}, {{"a", {0, 1, 0, 1}}, {"b", {1, 1, 2, 2}}});
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.rfind("</svg>") != std::string::npos);
  size_t polylines = 0;
  for (size_t p = content.find("<polyline"); p != std::string::npos;
       p = content.find("<polyline", p + 1))
    ++polylines;
  CHECK(polylines == 2);
  CHECK_THROWS_AS(write_svg_chart(path, "bad", {0, 1}, {{"a", {1}}}), std::invalid_argument);
}
