#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gotcha/controller.hpp"
#include "wordcount/launcher.hpp"

namespace wordcount {

enum class Schedule {
  // Grouper publishes, then three rounds of "both workers pull, both push",
  // which forks both workers from bar=2 in the third round. Free-run after.
  scripted,
  // Grant a uniformly random ready node each time.
  random,
  // Press play and wait.
  free_run,
};

struct ScenarioOptions {
  Schedule schedule = Schedule::scripted;
  std::uint64_t seed = 0;
  /// Scripted: registered once both third-round pulls are done. Otherwise up front.
  std::optional<std::string> breakpoint;
  /// Runs while the controller is paused at a hit; play resumes afterwards.
  std::function<void(gotcha::Controller&, const gotcha::BreakpointHit&)> on_hit;
  std::chrono::milliseconds timeout{60000};
};

struct ScenarioResult {
  std::string output;
  /// One entry per grant: seq, node, step, kind, phase and, for driven
  /// schedules, the granted node's history right after the grant settled.
  nlohmann::json transcript = nlohmann::json::array();
  std::optional<gotcha::BreakpointHit> hit;
};

/// Starts `cluster` (whose nodes must debug through `controller`), drives it
/// to completion and returns what the Grouper printed. Throws with the point
/// of divergence when the schedule cannot be followed.
ScenarioResult run_scenario(gotcha::Controller& controller, Cluster& cluster, const ScenarioOptions& options);

/// In-process cluster on a fresh controller.
ScenarioResult run_debugged(const ClusterConfig& config, const ScenarioOptions& options);
/// In-process cluster with no controller at all.
std::string run_direct(const ClusterConfig& config, std::chrono::milliseconds timeout = std::chrono::seconds(60));

struct ReadStabilityReport {
  /// Pull-to-pull intervals the observer went through.
  int intervals = 0;
  /// Intervals during which the observer saw the Grouper's HEAD move.
  int advanced = 0;
  std::vector<std::string> violations;
  std::string output;
};

/// Adds an observer node next to the word count that pulls, then fetches
/// twice, reading everything after each call, under a random schedule.
ReadStabilityReport run_read_stability(const ClusterConfig& config, std::uint64_t seed, int pulls = 8);

}  // namespace wordcount
