#include <doctest.h>

#include <fstream>

#include "test_util.hpp"
#include "textsynth/config.hpp"

using namespace textsynth;

TEST_CASE("config: file parsing with comments and overrides") {
  testutil::TempDir dir("cfg");
  std::ofstream(dir.file("a.conf")) << R"(# synthesis setup
backgrounds_dir = /data/bg
semantic_maps_dir = /data/maps   # trailing comment
max_instances = 7
min_score = 0.55
whitelist = wall, signboard,door
seed = 12345
)";
  SynthesisConfig cfg = load_synthesis_config(dir.file("a.conf"));
  CHECK(cfg.backgrounds_dir == "/data/bg");
  CHECK(cfg.semantic_maps_dir == "/data/maps");
  CHECK(cfg.max_instances == 7);
  CHECK(cfg.min_score == 0.55);
  CHECK(cfg.whitelist == std::set<std::string>{"wall", "signboard", "door"});
  CHECK(cfg.seed == 12345);

  cfg.set("max_instances", "3");
  CHECK(cfg.max_instances == 3);
  CHECK_THROWS_AS(cfg.set("not_a_key", "1"), InvalidArgument);
  CHECK_THROWS_AS(cfg.set("max_instances", "many"), InvalidArgument);
}

TEST_CASE("config: malformed lines rejected with the line number") {
  testutil::TempDir dir("cfg");
  std::ofstream(dir.file("bad.conf")) << "backgrounds_dir /no/equals\n";
  try {
    load_synthesis_config(dir.file("bad.conf"));
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("config: validation catches range and path problems") {
  SynthesisConfig cfg;
  cfg.max_instances = 20;  // above the hard cap of 15
  cfg.min_score = 1.5;
  auto problems = cfg.validate(/*check_paths=*/false);
  bool has_instances = false, has_score = false;
  for (const auto& p : problems) {
    has_instances |= p.find("max_instances") != std::string::npos;
    has_score |= p.find("min_score") != std::string::npos;
  }
  CHECK(has_instances);
  CHECK(has_score);

  SynthesisConfig paths;
  paths.backgrounds_dir = "/definitely/not/here";
  auto with_paths = paths.validate(/*check_paths=*/true);
  bool flagged = false;
  for (const auto& p : with_paths)
    flagged |= p.find("/definitely/not/here") != std::string::npos;
  CHECK(flagged);
}

TEST_CASE("config: every advertised key is settable") {
  SynthesisConfig cfg;
  for (const std::string& key : synthesis_config_keys()) {
    // Paths and names take arbitrary strings; numerics take "1".
    try {
      cfg.set(key, "1");
    } catch (const InvalidArgument&) {
      cfg.set(key, "x");
    }
  }
}
