#include "gotcha/controller.hpp"

#include <algorithm>

#include "got/error.hpp"
#include "got/serialize.hpp"
#include "got/version_graph.hpp"

namespace gotcha {

using got::Error;
using got::ErrorCode;
using nlohmann::json;

namespace {
constexpr std::size_t kExecutedKept = 1000;
}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::paused ? "paused" : "free-run"; }

Direction parse_direction(std::string_view text) {
  if (text == "promote" || text == "up") return Direction::promote;
  if (text == "demote" || text == "down") return Direction::demote;
  throw Error(ErrorCode::invalid_argument, "direction must be promote or demote, not '" + std::string(text) + "'");
}

std::string_view to_string(StepStatus status) {
  switch (status) {
    case StepStatus::waiting: return "waiting";
    case StepStatus::running: return "running";
    case StepStatus::done: return "done";
  }
  return "?";
}

json to_json(const StepView& s) {
  json j = {{"id", s.id},
            {"node", s.node},
            {"kind", got::to_string(s.kind)},
            {"flow", s.flow == got::Flow::app ? "app" : "server"},
            {"phases", s.phases},
            {"phase_index", s.phase_index},
            {"next_phase", s.next_phase()},
            {"status", to_string(s.status)},
            {"ready", s.ready},
            {"payload", s.payload}};
  if (!s.origin.empty()) j["origin"] = s.origin;
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

struct Controller::Step {
  std::string id;
  std::string node;
  got::StepKind kind = got::StepKind::commit;
  got::Flow flow = got::Flow::app;
  std::vector<std::string> phases;
  std::size_t phase_index = 0;
  StepStatus status = StepStatus::waiting;
  std::string origin;
  std::string forward_to;
  json payload;
  std::string error;
  std::uint64_t ready_seq = 0;
  // Set when the current gate is released.
  std::optional<got::GateDecision> decision;
};

struct Controller::Node {
  std::string name;
  std::string address;
  std::optional<std::string> remote;
  std::vector<got::TypeSchema> schemas;
  json history;
  got::State head_state;
  std::deque<std::shared_ptr<Step>> pending;
  std::vector<std::shared_ptr<Step>> executed;
  // The application is between steps (or has not issued its first one).
  bool app_busy = true;
  bool exited = false;
  std::string exit_error;
};

Controller::Controller(std::shared_ptr<got::Network> network) : network_(std::move(network)) {
  events_thread_ = std::thread([this] { event_loop(); });
}

Controller::~Controller() {
  shutdown();
  {
    std::lock_guard lock(events_mutex_);
    events_stop_ = true;
  }
  events_cv_.notify_all();
  if (events_thread_.joinable()) events_thread_.join();
}

void Controller::shutdown() {
  decltype(relays_) relays;
  {
    Lock lock(mutex_);
    shutdown_ = true;
    relays.swap(relays_);
  }
  changed_.notify_all();
  for (auto& [t, _] : relays) {
    if (t.joinable()) t.join();
  }
}

// ---- events ----

void Controller::emit_locked(json event) {
  event["clock"] = clock_;
  {
    std::lock_guard lock(events_mutex_);
    outbox_.push_back(std::move(event));
  }
  events_cv_.notify_one();
}

void Controller::event_loop() {
  std::unique_lock lock(events_mutex_);
  for (;;) {
    events_cv_.wait(lock, [&] { return events_stop_ || !outbox_.empty(); });
    if (outbox_.empty()) return;
    auto event = std::move(outbox_.front());
    outbox_.pop_front();
    auto sinks = sinks_;
    lock.unlock();
    for (auto& [_, sink] : sinks) {
      try {
        sink(event);
      } catch (...) {
      }
    }
    lock.lock();
  }
}

int Controller::subscribe(EventSink sink) {
  std::lock_guard lock(events_mutex_);
  sinks_[++next_sink_] = std::move(sink);
  return next_sink_;
}

void Controller::unsubscribe(int id) {
  std::lock_guard lock(events_mutex_);
  sinks_.erase(id);
}

// ---- node side ----

Controller::Node& Controller::node_locked(const std::string& name) {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::not_found, "no node named '" + name + "'");
  return *it->second;
}

const Controller::Node& Controller::node_locked(const std::string& name) const {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::not_found, "no node named '" + name + "'");
  return *it->second;
}

void Controller::register_node(const got::NodeRegistration& reg) {
  if (reg.name.empty()) throw Error(ErrorCode::invalid_argument, "node name is empty");
  Lock lock(mutex_);
  if (nodes_.count(reg.name) != 0) throw Error(ErrorCode::duplicate, "node '" + reg.name + "' already registered");
  auto node = std::make_unique<Node>();
  node->name = reg.name;
  node->address = reg.address;
  node->remote = reg.remote;
  node->schemas = reg.schemas;
  node->history = got::VersionGraph().to_json();
  nodes_[reg.name] = std::move(node);
  emit_locked({{"type", "node-registered"}, {"node", reg.name}});
  changed_.notify_all();
}

void Controller::update_history_locked(Node& node, json history) {
  if (history.is_null() || history == node.history) return;
  node.history = std::move(history);
  try {
    auto graph = got::VersionGraph::from_json(node.history);
    node.head_state = graph.state_at(graph.head());
  } catch (const std::exception&) {
    // Keep the previous HEAD state; the export will be replaced soon.
  }
  emit_locked({{"type", "history-updated"}, {"node", node.name}});
}

got::GateDecision Controller::submit(const got::DebugEnvelope& env) {
  Lock lock(mutex_);
  if (shutdown_) return got::GateDecision{"abort", std::nullopt};
  auto& node = node_locked(env.node_id);
  update_history_locked(node, env.history);

  if (env.event == "exit") {
    node.exited = true;
    node.app_busy = false;
    node.exit_error = env.error;
    emit_locked({{"type", "node-exited"}, {"node", node.name}, {"error", env.error}});
    evaluate_breakpoints_locked(node, nullptr);
    changed_.notify_all();
    dispatch_locked();
    return {};
  }
  if (env.event != "phase") throw Error(ErrorCode::protocol, "unknown envelope event '" + env.event + "'");
  if (env.step_id.empty()) throw Error(ErrorCode::protocol, "envelope without a step id");

  auto& slot = steps_[env.step_id];
  if (!slot) {
    slot = std::make_shared<Step>();
    slot->id = env.step_id;
    slot->node = node.name;
    slot->kind = env.step_kind;
    slot->flow = env.flow;
    slot->origin = env.origin_step;
    node.pending.push_back(slot);
    if (!slot->origin.empty()) ++serving_[slot->origin];
    emit_locked({{"type", "step-queued"}, {"node", node.name}, {"step", slot->id}});
  } else if (slot->node != node.name) {
    throw Error(ErrorCode::protocol, "step " + env.step_id + " belongs to " + slot->node);
  }
  auto step = slot;
  if (step->flow == got::Flow::app) node.app_busy = false;
  step->phases = env.phases;
  step->phase_index = env.phase_index;
  step->payload = env.payload;
  step->forward_to = env.forward_to;
  step->decision.reset();
  if (!env.error.empty()) step->error = env.error;

  if (env.phase_index >= env.phases.size()) {
    step->status = StepStatus::done;
    auto& q = node.pending;
    q.erase(std::remove(q.begin(), q.end(), step), q.end());
    node.executed.push_back(step);
    if (node.executed.size() > kExecutedKept) node.executed.erase(node.executed.begin());
    steps_.erase(step->id);
    if (!step->origin.empty() && --serving_[step->origin] <= 0) serving_.erase(step->origin);
    if (step->flow == got::Flow::app) node.app_busy = true;
    emit_locked({{"type", "step-finished"}, {"node", node.name}, {"step", step->id}, {"error", step->error}});
    evaluate_breakpoints_locked(node, step.get());
    changed_.notify_all();
    dispatch_locked();
    return {};
  }

  step->status = StepStatus::waiting;
  step->ready_seq = ++clock_;
  evaluate_breakpoints_locked(node, step.get());
  changed_.notify_all();
  dispatch_locked();
  changed_.wait(lock, [&] { return shutdown_ || step->decision.has_value(); });
  if (!step->decision) return got::GateDecision{"abort", std::nullopt};
  return *step->decision;
}

// ---- scheduling ----

bool Controller::running_locked(const Step& step) const {
  return step.status == StepStatus::running && serving_.count(step.id) == 0;
}

bool Controller::settled_locked() const {
  for (const auto& [_, node] : nodes_) {
    if (!node->exited && node->app_busy) return false;
    for (const auto& step : node->pending) {
      if (running_locked(*step)) return false;
    }
  }
  return true;
}

bool Controller::wait_settled(std::chrono::milliseconds timeout) const {
  Lock lock(mutex_);
  return changed_.wait_for(lock, timeout, [&] { return shutdown_ || settled_locked(); });
}

void Controller::require_settled(Lock& lock) {
  if (!changed_.wait_for(lock, settle_timeout_, [&] { return shutdown_ || settled_locked(); })) {
    throw Error(ErrorCode::precondition, "nodes are still executing");
  }
  if (shutdown_) throw Error(ErrorCode::precondition, "controller is shutting down");
}

void Controller::grant_locked(Step& step) {
  auto phase = step.phase_index < step.phases.size() ? step.phases[step.phase_index] : std::string{};
  ++clock_;
  grants_.push_back({clock_, step.node, step.id, step.kind, phase});
  step.status = StepStatus::running;
  emit_locked({{"type", "phase-executed"}, {"node", step.node}, {"step", step.id}, {"phase", phase}});

  if (step.forward_to.empty() || phase != got::phase::send_request) {
    step.decision = got::GateDecision{};
    changed_.notify_all();
    return;
  }

  // Relay the request ourselves; the peer's serving step queues like any other.
  for (auto it = relays_.begin(); it != relays_.end();) {
    if (it->second->load()) {
      it->first.join();
      it = relays_.erase(it);
    } else {
      ++it;
    }
  }
  auto done = std::make_shared<std::atomic<bool>>(false);
  auto target = step.forward_to;
  auto payload = step.payload;
  auto id = step.id;
  auto shared = steps_.at(step.id);
  std::thread relay([this, shared, target, payload, id, done] {
    got::SyncMessage reply;
    try {
      reply = network_->send(target, got::sync_message_from_json(payload), id);
    } catch (const std::exception& e) {
      reply = got::ErrorReply{"network", e.what()};
    }
    {
      Lock lock(mutex_);
      shared->decision = got::GateDecision{"forward", std::move(reply)};
    }
    changed_.notify_all();
    done->store(true);
  });
  relays_.emplace_back(std::move(relay), done);
}

void Controller::dispatch_locked() {
  if (shutdown_ || mode_ != Mode::free_run || !settled_locked()) return;
  Step* best = nullptr;
  for (auto& [_, node] : nodes_) {
    if (node->pending.empty()) continue;
    auto& head = *node->pending.front();
    if (head.status != StepStatus::waiting || head.decision) continue;
    if (best == nullptr || head.ready_seq < best->ready_seq) best = &head;
  }
  if (best != nullptr) grant_locked(*best);
}

void Controller::step_node(const std::string& name) {
  Lock lock(mutex_);
  if (mode_ != Mode::paused) throw Error(ErrorCode::precondition, "pause before stepping");
  node_locked(name);
  require_settled(lock);
  auto& node = node_locked(name);
  if (node.pending.empty() || node.pending.front()->status != StepStatus::waiting) {
    throw Error(ErrorCode::precondition, "node '" + name + "' has no pending phase");
  }
  grant_locked(*node.pending.front());
  require_settled(lock);
}

void Controller::step_all() {
  Lock lock(mutex_);
  if (mode_ != Mode::paused) throw Error(ErrorCode::precondition, "pause before stepping");
  require_settled(lock);
  std::vector<std::string> ready;
  for (const auto& [name, node] : nodes_) {
    if (!node->pending.empty() && node->pending.front()->status == StepStatus::waiting) ready.push_back(name);
  }
  for (const auto& name : ready) {
    auto& node = node_locked(name);
    if (node.pending.empty() || node.pending.front()->status != StepStatus::waiting) continue;
    grant_locked(*node.pending.front());
    require_settled(lock);
  }
}

void Controller::play() {
  Lock lock(mutex_);
  if (mode_ != Mode::free_run) {
    mode_ = Mode::free_run;
    emit_locked({{"type", "mode-changed"}, {"mode", to_string(mode_)}});
  }
  dispatch_locked();
}

void Controller::pause() {
  Lock lock(mutex_);
  if (mode_ != Mode::paused) {
    mode_ = Mode::paused;
    emit_locked({{"type", "mode-changed"}, {"mode", to_string(mode_)}});
  }
}

Mode Controller::mode() const {
  Lock lock(mutex_);
  return mode_;
}

void Controller::reorder_step(const std::string& name, const std::string& step_id, Direction dir) {
  Lock lock(mutex_);
  auto& q = node_locked(name).pending;
  auto it = std::find_if(q.begin(), q.end(), [&](const auto& s) { return s->id == step_id; });
  if (it == q.end()) throw Error(ErrorCode::not_found, "no pending step '" + step_id + "' at " + name);
  auto started = [](const Step& s) { return s.phase_index > 0 || s.status != StepStatus::waiting; };
  if (started(**it)) throw Error(ErrorCode::precondition, "step " + step_id + " is already executing");
  auto i = static_cast<std::size_t>(it - q.begin());
  if (dir == Direction::promote && i == 0) {
    throw Error(ErrorCode::invalid_argument, "step " + step_id + " is already first");
  }
  if (dir == Direction::demote && i + 1 == q.size()) {
    throw Error(ErrorCode::invalid_argument, "step " + step_id + " is already last");
  }
  auto j = dir == Direction::promote ? i - 1 : i + 1;
  if (started(*q[j])) throw Error(ErrorCode::precondition, "cannot move past executing step " + q[j]->id);
  std::swap(q[i], q[j]);
  emit_locked({{"type", "steps-reordered"}, {"node", name}, {"step", step_id}});
  changed_.notify_all();
  dispatch_locked();
}

void Controller::rollback_node(const std::string& name, const got::VersionId& version) {
  Lock lock(mutex_);
  if (mode_ != Mode::paused) throw Error(ErrorCode::precondition, "pause before rolling back");
  node_locked(name);
  require_settled(lock);
  auto& node = node_locked(name);
  if (node.exited) throw Error(ErrorCode::precondition, "node '" + name + "' has exited");
  if (!node.pending.empty() && node.pending.front()->phase_index > 0) {
    throw Error(ErrorCode::precondition, "node '" + name + "' is in the middle of step " + node.pending.front()->id);
  }
  auto graph = got::VersionGraph::from_json(node.history);
  if (!graph.contains(version)) throw Error(ErrorCode::unknown_version, "unknown version '" + version + "'");
  if (!graph.is_ancestor(version, graph.head())) {
    throw Error(ErrorCode::precondition, "version '" + version + "' is not an ancestor of HEAD");
  }
  if (version == graph.head()) return;
  auto address = node.address;

  lock.unlock();
  auto reply = network_->send(address, got::RollbackRequest{version});
  lock.lock();

  if (const auto* e = std::get_if<got::ErrorReply>(&reply)) {
    throw Error(ErrorCode::precondition, "rollback refused by " + name + ": " + e->detail);
  }
  const auto* ack = std::get_if<got::RollbackAck>(&reply);
  if (ack == nullptr) throw Error(ErrorCode::protocol, "unexpected rollback reply " + got::message_type(reply));
  auto& same = node_locked(name);
  update_history_locked(same, ack->history);
  emit_locked({{"type", "rolled-back"}, {"node", name}, {"version", version}});
  evaluate_breakpoints_locked(same, nullptr);
  changed_.notify_all();
}

// ---- breakpoints ----

void Controller::evaluate_breakpoints_locked(Node& node, const Step* step) {
  for (const auto& bp : breakpoints_) {
    std::pair key{bp.id, node.name};
    if (!evaluate(bp.predicate, node.head_state)) {
      firing_.erase(key);
      continue;
    }
    if (!firing_.insert(key).second) continue;
    BreakpointHit hit{bp.id, node.name, step != nullptr ? step->id : std::string{},
                      step != nullptr && step->phase_index < step->phases.size() ? step->phases[step->phase_index]
                                                                                  : std::string{}};
    hits_.push_back(hit);
    if (mode_ != Mode::paused) {
      mode_ = Mode::paused;
      emit_locked({{"type", "mode-changed"}, {"mode", to_string(mode_)}});
    }
    emit_locked({{"type", "breakpoint-hit"},
                 {"breakpoint", hit.breakpoint_id},
                 {"text", bp.text},
                 {"node", hit.node},
                 {"step", hit.step_id},
                 {"phase", hit.phase}});
  }
}

std::string Controller::add_breakpoint(const std::string& text) {
  auto pred = parse_predicate(text);
  Lock lock(mutex_);
  auto id = "bp" + std::to_string(++next_breakpoint_);
  breakpoints_.push_back({id, text, std::move(pred)});
  emit_locked({{"type", "breakpoints-changed"}});
  return id;
}

void Controller::remove_breakpoint(const std::string& id) {
  Lock lock(mutex_);
  auto it = std::find_if(breakpoints_.begin(), breakpoints_.end(), [&](const auto& b) { return b.id == id; });
  if (it == breakpoints_.end()) throw Error(ErrorCode::not_found, "no breakpoint '" + id + "'");
  breakpoints_.erase(it);
  for (auto f = firing_.begin(); f != firing_.end();) {
    f = f->first == id ? firing_.erase(f) : std::next(f);
  }
  emit_locked({{"type", "breakpoints-changed"}});
}

void Controller::clear_breakpoints() {
  Lock lock(mutex_);
  breakpoints_.clear();
  firing_.clear();
  emit_locked({{"type", "breakpoints-changed"}});
}

std::vector<Breakpoint> Controller::breakpoints() const {
  Lock lock(mutex_);
  return breakpoints_;
}

std::vector<BreakpointHit> Controller::hits() const {
  Lock lock(mutex_);
  return hits_;
}

json Controller::breakpoints_json() const {
  Lock lock(mutex_);
  json out = json::array();
  for (const auto& bp : breakpoints_) out.push_back({{"id", bp.id}, {"predicate", bp.text}});
  return out;
}

// ---- views ----

StepView Controller::view_locked(const Step& s) const {
  StepView v;
  v.id = s.id;
  v.node = s.node;
  v.kind = s.kind;
  v.flow = s.flow;
  v.phases = s.phases;
  v.phase_index = s.phase_index;
  v.status = s.status;
  v.origin = s.origin;
  v.payload = s.payload;
  v.error = s.error;
  if (s.status == StepStatus::waiting && !s.decision) {
    auto it = nodes_.find(s.node);
    v.ready = it != nodes_.end() && !it->second->pending.empty() && it->second->pending.front().get() == &s;
  }
  return v;
}

std::vector<std::string> Controller::node_names() const {
  Lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, _] : nodes_) out.push_back(name);
  return out;
}

bool Controller::has_node(const std::string& name) const {
  Lock lock(mutex_);
  return nodes_.count(name) != 0;
}

NodeView Controller::node(const std::string& name) const {
  Lock lock(mutex_);
  const auto& n = node_locked(name);
  NodeView v{n.name, n.address, n.remote, n.exited, n.exit_error, {}, {}};
  for (const auto& s : n.pending) v.pending.push_back(view_locked(*s));
  for (const auto& s : n.executed) v.executed.push_back(view_locked(*s));
  return v;
}

std::vector<Grant> Controller::grants() const {
  Lock lock(mutex_);
  return grants_;
}

json Controller::topology() const {
  Lock lock(mutex_);
  json nodes = json::array();
  json edges = json::array();
  std::map<std::string, std::string> by_address;
  for (const auto& [name, n] : nodes_) by_address[n->address] = name;
  for (const auto& [name, n] : nodes_) {
    json schemas = json::array();
    for (const auto& s : n->schemas) schemas.push_back(s.name);
    nodes.push_back({{"name", name},
                     {"address", n->address},
                     {"remote", n->remote ? json(*n->remote) : json(nullptr)},
                     {"types", schemas},
                     {"exited", n->exited},
                     {"pending", n->pending.size()}});
    if (n->remote) {
      auto it = by_address.find(*n->remote);
      edges.push_back({{"from", name}, {"to", it != by_address.end() ? it->second : *n->remote}});
    }
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

json Controller::history(const std::string& name) const {
  Lock lock(mutex_);
  return node_locked(name).history;
}

json Controller::steps(const std::string& name) const {
  Lock lock(mutex_);
  const auto& n = node_locked(name);
  json pending = json::array();
  json executed = json::array();
  for (const auto& s : n.pending) pending.push_back(to_json(view_locked(*s)));
  for (const auto& s : n.executed) executed.push_back(to_json(view_locked(*s)));
  return {{"node", name}, {"pending", pending}, {"executed", executed}};
}

json Controller::state(const std::string& name, const std::optional<got::VersionId>& version) const {
  json history;
  {
    Lock lock(mutex_);
    history = node_locked(name).history;
  }
  auto graph = got::VersionGraph::from_json(history);
  auto v = version.value_or(graph.head());
  return {{"node", name}, {"version", v}, {"state", got::state_to_json(graph.state_at(v))}};
}

json Controller::status() const {
  Lock lock(mutex_);
  json hits = json::array();
  for (const auto& h : hits_) {
    hits.push_back({{"breakpoint", h.breakpoint_id}, {"node", h.node}, {"step", h.step_id}, {"phase", h.phase}});
  }
  json nodes = json::array();
  for (const auto& [name, _] : nodes_) nodes.push_back(name);
  return {{"mode", to_string(mode_)}, {"clock", clock_}, {"nodes", nodes}, {"settled", settled_locked()}, {"hits", hits}};
}

}  // namespace gotcha
