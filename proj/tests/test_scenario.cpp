#include <doctest.h>

#include "wordcount/scenario.hpp"

using namespace wordcount;

TEST_CASE("scripted schedule reproduces both merges") {
  ClusterConfig cfg;
  ScenarioOptions opt;
  cfg.resolver = "buggy";
  CHECK(run_debugged(cfg, opt).output == "foo 1\nbar 6\nbaz 1\n");
  cfg.resolver = "fixed";
  CHECK(run_debugged(cfg, opt).output == "foo 1\nbar 4\nbaz 1\n");
}

TEST_CASE("breakpoint stops the Grouper before garbage collection") {
  ClusterConfig cfg;
  cfg.resolver = "buggy";
  ScenarioOptions opt;
  opt.breakpoint = "exists(WordCount, count == 6)";
  nlohmann::json pending;
  opt.on_hit = [&](gotcha::Controller& c, const gotcha::BreakpointHit&) { pending = c.steps(kGrouperName)["pending"]; };
  auto r = run_debugged(cfg, opt);
  REQUIRE(r.hit);
  CHECK(r.hit->node == kGrouperName);
  REQUIRE(!pending.empty());
  CHECK(pending[0]["kind"] == "respond-to-push");
  CHECK(pending[0]["next_phase"] == "garbage-collect");
  CHECK(r.output == "foo 1\nbar 6\nbaz 1\n");
}

TEST_CASE("random and free-run schedules with the fixed merge") {
  ClusterConfig cfg;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScenarioOptions opt;
    opt.schedule = Schedule::random;
    opt.seed = seed;
    CHECK(run_debugged(cfg, opt).output == "foo 1\nbar 4\nbaz 1\n");
  }
  ScenarioOptions fr;
  fr.schedule = Schedule::free_run;
  CHECK(run_debugged(cfg, fr).output == "foo 1\nbar 4\nbaz 1\n");
  CHECK(run_direct(cfg) == "foo 1\nbar 4\nbaz 1\n");
}

TEST_CASE("read stability") {
  auto r = run_read_stability(ClusterConfig{}, 7);
  CHECK(r.violations.empty());
  CHECK(r.intervals > 0);
  CHECK(r.advanced > 0);
  MESSAGE(r.intervals << " " << r.advanced);
}
