#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <thread>

#include <doctest.h>

#include "got/node.hpp"
#include "gotcha/channel.hpp"
#include "gotcha/controller.hpp"
#include "wordcount/wordcount.hpp"

namespace testing {

// Debugged in-process nodes around one controller.
struct Rig {
  std::shared_ptr<got::InProcessNetwork> net = std::make_shared<got::InProcessNetwork>();
  gotcha::Controller ctrl{net};
  std::vector<std::unique_ptr<got::Node>> nodes;

  Rig() { ctrl.set_settle_timeout(std::chrono::seconds(10)); }

  ~Rig() {
    ctrl.shutdown();
    for (auto& n : nodes) {
      try {
        n->join();
      } catch (...) {
      }
    }
  }

  got::Node& add(const std::string& name, got::AppFunction app, std::optional<std::string> remote = std::nullopt,
                 got::Resolver resolver = {}) {
    got::NodeConfig cfg;
    cfg.name = name;
    cfg.app = std::move(app);
    cfg.registry = wordcount::schemas();
    cfg.server_port = 0;
    cfg.remote = std::move(remote);
    cfg.resolver = std::move(resolver);
    cfg.network = net;
    cfg.debug = std::make_shared<gotcha::ControllerChannel>(ctrl);
    nodes.push_back(std::make_unique<got::Node>(std::move(cfg)));
    nodes.back()->start_async();
    while (!ctrl.has_node(name)) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    REQUIRE(ctrl.wait_settled(std::chrono::seconds(10)));
    return *nodes.back();
  }

  std::string next_phase(const std::string& node) const {
    auto v = ctrl.node(node);
    return v.pending.empty() ? std::string{} : v.pending.front().next_phase();
  }

  // Steps `node` (or whoever is serving it) until its head pending step has
  // `kind` and is about to run `phase`.
  void step_until(const std::string& node, const std::string& kind, const std::string& phase, int limit = 100) {
    for (int i = 0; i < limit; ++i) {
      REQUIRE(ctrl.wait_settled(std::chrono::seconds(10)));
      auto v = ctrl.node(node);
      if (!v.pending.empty() && got::to_string(v.pending.front().kind) == kind &&
          v.pending.front().next_phase() == phase && v.ready_step() != nullptr) {
        return;
      }
      if (v.ready_step() != nullptr) {
        ctrl.step_node(node);
        continue;
      }
      std::optional<std::string> helper;
      for (const auto& n : ctrl.node_names()) {
        const auto* s = ctrl.node(n).ready_step();
        if (s != nullptr && s->origin.rfind(node + "#", 0) == 0) helper = n;
      }
      if (!helper) FAIL("nothing can run on behalf of " << node);
      ctrl.step_node(*helper);
    }
    FAIL("never reached " << kind << "/" << phase << " at " << node);
  }
};

// Keeps checking out until released, so a server node stays up and gated.
struct Idle {
  std::shared_ptr<std::atomic<bool>> stop = std::make_shared<std::atomic<bool>>(false);

  got::AppFunction app(std::function<void(got::Dataframe&)> setup = {}) const {
    auto s = stop;
    return [s, setup](got::Dataframe& df, const std::vector<std::string>&) {
      if (setup) setup(df);
      while (!s->load()) {
        // A rollback can leave the snapshot ahead of the history.
        if (df.staged().empty()) {
          df.checkout();
        } else {
          df.commit();
        }
      }
    };
  }
};

}  // namespace testing
