#include "wordcount/scenario.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include "got/error.hpp"
#include "got/serialize.hpp"
#include "gotcha/channel.hpp"

namespace wordcount {

using got::Error;
using got::ErrorCode;
using got::StepKind;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

json grant_json(const gotcha::Grant& g) {
  return {{"seq", g.seq}, {"node", g.node}, {"step", g.step_id}, {"kind", got::to_string(g.kind)}, {"phase", g.phase}};
}

class Driver {
 public:
  Driver(gotcha::Controller& ctrl, std::vector<std::string> names, const ScenarioOptions& options)
      : ctrl_(ctrl), names_(std::move(names)), options_(options), deadline_(Clock::now() + options.timeout) {}

  void wait_registered() {
    for (const auto& n : names_) {
      while (!ctrl_.has_node(n)) {
        check_deadline("waiting for " + n + " to register");
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
    }
  }

  void settle() {
    if (!ctrl_.wait_settled(remaining())) unreachable("nodes never settled");
  }

  bool all_exited() const {
    for (const auto& n : names_) {
      if (!ctrl_.node(n).exited) return false;
    }
    return true;
  }

  void step(const std::string& name) {
    ctrl_.step_node(name);
    auto grants = ctrl_.grants();
    if (!grants.empty()) {
      auto entry = grant_json(grants.back());
      entry["history"] = ctrl_.history(name);
      transcript_.push_back(std::move(entry));
    }
    check_hit();
  }

  static int executed(const gotcha::NodeView& v, StepKind kind) {
    return static_cast<int>(std::count_if(v.executed.begin(), v.executed.end(), [&](const gotcha::StepView& s) {
      return s.flow == got::Flow::app && s.kind == kind;
    }));
  }

  // Steps `name`, or whichever node it waits on, until it finishes one more
  // application step of `kind`.
  void advance(const std::string& name, StepKind kind) {
    settle();
    int before = executed(ctrl_.node(name), kind);
    for (;;) {
      check_deadline("advancing " + name + " to a " + std::string(got::to_string(kind)));
      settle();
      auto v = ctrl_.node(name);
      if (executed(v, kind) > before) return;
      if (v.exited) unreachable(name + " exited before its next " + std::string(got::to_string(kind)));
      if (v.ready_step() != nullptr) {
        step(name);
        continue;
      }
      auto helper = pick_helper(name);
      if (!helper) unreachable(name + " is blocked and no node can run on its behalf");
      step(*helper);
    }
  }

  std::optional<std::string> pick_helper(const std::string& name) {
    std::optional<std::string> grouper;
    std::optional<std::string> any;
    for (const auto& n : ctrl_.node_names()) {
      auto v = ctrl_.node(n);
      const auto* s = v.ready_step();
      if (s == nullptr) continue;
      if (s->origin.rfind(name + "#", 0) == 0) return n;
      if (n == kGrouperName) grouper = n;
      if (!any) any = n;
    }
    return grouper ? grouper : any;
  }

  void random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (;;) {
      check_deadline("random schedule");
      settle();
      std::vector<std::string> ready;
      for (const auto& n : ctrl_.node_names()) {
        if (ctrl_.node(n).ready_step() != nullptr) ready.push_back(n);
      }
      if (ready.empty()) {
        if (all_exited()) return;
        unreachable("no node can run although some are still alive");
      }
      std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
      step(ready[pick(rng)]);
    }
  }

  // Free-run until every node exits, stopping at breakpoint hits.
  void play() {
    ctrl_.play();
    for (;;) {
      check_deadline("free run");
      if (all_exited()) return;
      if (ctrl_.mode() == gotcha::Mode::paused) {
        settle();
        check_hit();
        ctrl_.play();
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

  void check_hit() {
    auto hits = ctrl_.hits();
    if (hits.size() <= seen_hits_) return;
    seen_hits_ = hits.size();
    if (!hit_) {
      hit_ = hits.back();
      if (options_.on_hit) {
        settle();
        options_.on_hit(ctrl_, *hit_);
      }
    }
  }

  [[noreturn]] void unreachable(const std::string& what) {
    std::ostringstream s;
    s << "scenario unreachable: " << what;
    auto grants = ctrl_.grants();
    if (!grants.empty()) s << " (after grant " << grant_json(grants.back()).dump() << ")";
    throw Error(ErrorCode::precondition, s.str());
  }

  void check_deadline(const std::string& what) {
    if (Clock::now() > deadline_) unreachable("timed out " + what);
  }

  std::chrono::milliseconds remaining() const {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline_ - Clock::now());
    return std::max(left, std::chrono::milliseconds(1));
  }

  json transcript_ = json::array();
  std::optional<gotcha::BreakpointHit> hit_;

 private:
  gotcha::Controller& ctrl_;
  std::vector<std::string> names_;
  const ScenarioOptions& options_;
  Clock::time_point deadline_;
  std::size_t seen_hits_ = 0;
};

}  // namespace

ScenarioResult run_scenario(gotcha::Controller& controller, Cluster& cluster, const ScenarioOptions& options) {
  Driver d(controller, cluster.node_names(), options);
  auto started = Clock::now();
  cluster.start();
  d.wait_registered();

  switch (options.schedule) {
    case Schedule::scripted: {
      d.advance(kGrouperName, StepKind::checkout);
      auto workers = cluster.node_names();
      workers.erase(workers.begin());
      for (int round = 1; round <= 3; ++round) {
        for (const auto& w : workers) d.advance(w, StepKind::checkout);
        if (round == 3 && options.breakpoint) {
          controller.add_breakpoint(*options.breakpoint);
          break;
        }
        for (const auto& w : workers) d.advance(w, StepKind::push);
      }
      d.play();
      break;
    }
    case Schedule::random:
      if (options.breakpoint) controller.add_breakpoint(*options.breakpoint);
      d.random(options.seed);
      break;
    case Schedule::free_run:
      if (options.breakpoint) controller.add_breakpoint(*options.breakpoint);
      d.play();
      break;
  }

  auto left = options.timeout - std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
  cluster.wait(std::max(left, std::chrono::milliseconds(1000)));

  ScenarioResult r;
  r.output = cluster.output();
  if (options.schedule == Schedule::free_run || options.schedule == Schedule::scripted) {
    // The free-run tail was not observed grant by grant.
    auto seen = d.transcript_.size();
    auto grants = controller.grants();
    r.transcript = std::move(d.transcript_);
    for (std::size_t i = seen; i < grants.size(); ++i) r.transcript.push_back(grant_json(grants[i]));
  } else {
    r.transcript = std::move(d.transcript_);
  }
  r.hit = d.hit_;
  return r;
}

ScenarioResult run_debugged(const ClusterConfig& config, const ScenarioOptions& options) {
  auto network = std::make_shared<got::InProcessNetwork>();
  gotcha::Controller controller(network);
  auto cluster = make_thread_cluster(config, network, &controller);
  try {
    return run_scenario(controller, *cluster, options);
  } catch (...) {
    controller.shutdown();
    throw;
  }
}

std::string run_direct(const ClusterConfig& config, std::chrono::milliseconds timeout) {
  auto network = std::make_shared<got::InProcessNetwork>();
  auto cluster = make_thread_cluster(config, network);
  cluster->start();
  cluster->wait(timeout);
  return cluster->output();
}

// ---- read stability ----

namespace {

std::vector<got::ObjectState> read_everything(got::Dataframe& df) {
  std::vector<got::ObjectState> all;
  for (const char* type : {kLine, kWordCount, kStop}) {
    for (auto& h : df.read_all(type)) all.push_back(h.state());
  }
  return all;
}

}  // namespace

ReadStabilityReport run_read_stability(const ClusterConfig& config, std::uint64_t seed, int pulls) {
  auto network = std::make_shared<got::InProcessNetwork>();
  gotcha::Controller controller(network);
  auto cluster = make_thread_cluster(config, network, &controller);
  ReadStabilityReport report;

  ScenarioOptions options;
  options.schedule = Schedule::random;
  options.seed = seed;
  Driver d(controller, cluster->node_names(), options);
  cluster->start();
  d.wait_registered();

  got::NodeConfig cfg;
  cfg.name = "Observer";
  cfg.registry = schemas();
  cfg.remote = controller.node(kGrouperName).address;
  cfg.network = network;
  cfg.debug = std::make_shared<gotcha::ControllerChannel>(controller);
  cfg.app = [&report, pulls](got::Dataframe& df, const std::vector<std::string>&) {
    auto grouper_head = [&] { return df.graph().ref(*df.remote()).value_or(""); };
    for (int i = 0; i < pulls; ++i) {
      try {
        df.pull();
        auto first = read_everything(df);
        auto at_pull = grouper_head();
        bool moved = false;
        for (int f = 0; f < 2; ++f) {
          df.fetch();
          moved = moved || grouper_head() != at_pull;
          if (read_everything(df) != first) {
            report.violations.push_back("interval " + std::to_string(i) + ": reads changed after fetch " +
                                        std::to_string(f + 1));
          }
        }
        ++report.intervals;
        if (moved) ++report.advanced;
      } catch (const got::Error&) {
        // The Grouper finished and stopped serving.
        return;
      }
    }
  };
  got::Node observer(std::move(cfg));
  std::exception_ptr failure;
  std::thread t([&] {
    try {
      observer.run();
    } catch (...) {
      failure = std::current_exception();
    }
  });

  try {
    // The observer only counts once it has registered.
    while (!controller.has_node("Observer")) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    Driver all(controller, controller.node_names(), options);
    all.random(seed);
    cluster->wait(options.timeout);
  } catch (...) {
    controller.shutdown();
    t.join();
    throw;
  }
  t.join();
  if (failure) std::rethrow_exception(failure);
  report.output = cluster->output();
  return report;
}

}  // namespace wordcount
