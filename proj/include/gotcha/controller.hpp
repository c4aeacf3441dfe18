#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "got/sync.hpp"
#include "got/transport.hpp"
#include "gotcha/breakpoint.hpp"

namespace gotcha {

enum class Mode { paused, free_run };
std::string_view to_string(Mode mode);

enum class Direction { promote, demote };
Direction parse_direction(std::string_view text);

enum class StepStatus { waiting, running, done };
std::string_view to_string(StepStatus status);

struct StepView {
  std::string id;
  std::string node;
  got::StepKind kind = got::StepKind::commit;
  got::Flow flow = got::Flow::app;
  std::vector<std::string> phases;
  /// Next phase to run; phases.size() once the step finished.
  std::size_t phase_index = 0;
  StepStatus status = StepStatus::waiting;
  std::string origin;
  nlohmann::json payload;
  std::string error;

  /// Blocked at a gate and first in its node's queue.
  bool ready = false;
  std::string next_phase() const { return phase_index < phases.size() ? phases[phase_index] : std::string{}; }
};

nlohmann::json to_json(const StepView& step);

struct NodeView {
  std::string name;
  std::string address;
  std::optional<std::string> remote;
  bool exited = false;
  std::string exit_error;
  std::vector<StepView> pending;
  std::vector<StepView> executed;

  const StepView* ready_step() const { return !pending.empty() && pending.front().ready ? &pending.front() : nullptr; }
};

struct BreakpointHit {
  std::string breakpoint_id;
  std::string node;
  std::string step_id;
  std::string phase;
};

/// One granted phase, numbered by the controller's logical clock.
struct Grant {
  std::uint64_t seq = 0;
  std::string node;
  std::string step_id;
  got::StepKind kind = got::StepKind::commit;
  std::string phase;
};

using EventSink = std::function<void(const nlohmann::json& event)>;

/// The debugger's brain: gates every phase of every registered node, decides
/// when each runs and keeps the latest version history of each node.
class Controller {
 public:
  /// `network` reaches the nodes' sync endpoints (relayed requests, rollback).
  explicit Controller(std::shared_ptr<got::Network> network);
  ~Controller();
  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;

  /// Releases every blocked node with an abort decision.
  void shutdown();

  // Node side.
  void register_node(const got::NodeRegistration& reg);
  got::GateDecision submit(const got::DebugEnvelope& env);

  // User commands.
  void step_node(const std::string& name);
  void step_all();
  void play();
  void pause();
  Mode mode() const;
  void reorder_step(const std::string& node, const std::string& step_id, Direction dir);
  void rollback_node(const std::string& node, const got::VersionId& version);

  std::string add_breakpoint(const std::string& text);
  void remove_breakpoint(const std::string& id);
  void clear_breakpoints();
  std::vector<Breakpoint> breakpoints() const;
  std::vector<BreakpointHit> hits() const;

  // Views.
  std::vector<std::string> node_names() const;
  bool has_node(const std::string& name) const;
  NodeView node(const std::string& name) const;
  std::vector<Grant> grants() const;
  nlohmann::json topology() const;
  nlohmann::json history(const std::string& name) const;
  nlohmann::json steps(const std::string& name) const;
  nlohmann::json state(const std::string& name, const std::optional<got::VersionId>& version) const;
  nlohmann::json breakpoints_json() const;
  nlohmann::json status() const;

  /// True once nothing is executing: every live node is blocked at a gate,
  /// waiting on a peer, or gone.
  bool wait_settled(std::chrono::milliseconds timeout) const;
  void set_settle_timeout(std::chrono::milliseconds timeout) { settle_timeout_ = timeout; }

  int subscribe(EventSink sink);
  void unsubscribe(int id);

 private:
  struct Step;
  struct Node;

  using Lock = std::unique_lock<std::mutex>;

  Node& node_locked(const std::string& name);
  const Node& node_locked(const std::string& name) const;
  bool settled_locked() const;
  bool running_locked(const Step& step) const;
  void require_settled(Lock& lock);
  void grant_locked(Step& step);
  void dispatch_locked();
  void evaluate_breakpoints_locked(Node& node, const Step* step);
  void update_history_locked(Node& node, nlohmann::json history);
  StepView view_locked(const Step& step) const;
  void emit_locked(nlohmann::json event);
  void event_loop();

  std::shared_ptr<got::Network> network_;
  std::chrono::milliseconds settle_timeout_{30000};

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  bool shutdown_ = false;
  Mode mode_ = Mode::paused;
  std::map<std::string, std::unique_ptr<Node>> nodes_;
  std::map<std::string, std::shared_ptr<Step>> steps_;
  // Unfinished steps serving each remote step.
  std::map<std::string, int> serving_;
  std::uint64_t clock_ = 0;
  std::vector<Grant> grants_;
  std::vector<Breakpoint> breakpoints_;
  std::uint64_t next_breakpoint_ = 0;
  std::set<std::pair<std::string, std::string>> firing_;
  std::vector<BreakpointHit> hits_;
  // Requests being relayed to a peer on behalf of a granted step.
  std::vector<std::pair<std::thread, std::shared_ptr<std::atomic<bool>>>> relays_;

  std::mutex events_mutex_;
  std::condition_variable events_cv_;
  std::deque<nlohmann::json> outbox_;
  std::map<int, EventSink> sinks_;
  int next_sink_ = 0;
  bool events_stop_ = false;
  std::thread events_thread_;
};

}  // namespace gotcha
