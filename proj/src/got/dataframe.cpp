#include "got/dataframe.hpp"

#include "got/error.hpp"
#include "got/serialize.hpp"

namespace got {

/// Announces a step's phases to the debugger (when attached) and holds the
/// node's writer lock while the step touches the version history. Without a
/// debugger the lock is taken up front and every gate passes immediately.
class StepGate {
 public:
  StepGate(Dataframe& df, StepKind kind, Flow flow, std::string origin = {})
      : df_(df), kind_(kind), flow_(flow), origin_(std::move(origin)), phases_(initial_phases(kind)) {
    if (debugged()) {
      step_id_ = df_.next_step_id();
    } else {
      lock_ = std::unique_lock(df_.step_mutex_);
    }
  }

  StepGate(const StepGate&) = delete;
  StepGate& operator=(const StepGate&) = delete;

  ~StepGate() {
    if (finished_) return;
    if (lock_.owns_lock()) lock_.unlock();
    if (!debugged()) return;
    try {
      auto env = envelope(phases_.size(), {});
      env.error = "step failed";
      df_.options_.debug->submit(env);
    } catch (...) {
    }
  }

  bool debugged() const { return df_.options_.debug != nullptr; }
  const std::string& step_id() const { return step_id_; }

  /// Blocks until the next phase may run.
  GateDecision advance(nlohmann::json payload = {}, std::string forward_to = {}) {
    if (next_ >= phases_.size()) throw Error(ErrorCode::precondition, "step has no phases left");
    GateDecision decision;
    if (debugged()) {
      auto env = envelope(next_, std::move(payload));
      env.forward_to = std::move(forward_to);
      do {
        decision = df_.options_.debug->submit(env);
        if (decision.action == "abort") {
          throw Error(ErrorCode::precondition, "step " + step_id_ + " aborted by the debugger");
        }
      } while (decision.action == "hold");
      if (!lock_.owns_lock()) lock_ = std::unique_lock(df_.step_mutex_);
    }
    ++next_;
    return decision;
  }

  /// Adds `name` as the phase that runs next.
  void insert_next(const std::string& name) {
    phases_.insert(phases_.begin() + static_cast<std::ptrdiff_t>(next_), name);
  }

  void finish() {
    if (lock_.owns_lock()) lock_.unlock();
    finished_ = true;
    if (debugged()) df_.options_.debug->submit(envelope(phases_.size(), {}));
  }

 private:
  DebugEnvelope envelope(std::size_t index, nlohmann::json payload) const {
    DebugEnvelope env;
    env.node_id = df_.node_name();
    env.step_id = step_id_;
    env.step_kind = kind_;
    env.flow = flow_;
    env.phase_index = index;
    env.phases = phases_;
    env.origin_step = origin_;
    env.payload = std::move(payload);
    env.history = df_.history();
    return env;
  }

  Dataframe& df_;
  StepKind kind_;
  Flow flow_;
  std::string origin_;
  std::string step_id_;
  std::vector<std::string> phases_;
  std::size_t next_ = 0;
  bool finished_ = false;
  std::unique_lock<std::mutex> lock_;
};

// ---- handles ----

Value ObjectHandle::get(const std::string& dim) const { return df_->handle_get(*this, dim); }

std::int64_t ObjectHandle::get_int(const std::string& dim) const {
  auto v = get(dim);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw Error(ErrorCode::invalid_argument, "dimension '" + dim + "' is not an int");
}

double ObjectHandle::get_float(const std::string& dim) const {
  auto v = get(dim);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw Error(ErrorCode::invalid_argument, "dimension '" + dim + "' is not a float");
}

std::string ObjectHandle::get_string(const std::string& dim) const {
  auto v = get(dim);
  if (auto* s = std::get_if<std::string>(&v)) return std::move(*s);
  throw Error(ErrorCode::invalid_argument, "dimension '" + dim + "' is not a str");
}

bool ObjectHandle::get_bool(const std::string& dim) const {
  auto v = get(dim);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw Error(ErrorCode::invalid_argument, "dimension '" + dim + "' is not a bool");
}

void ObjectHandle::set(const std::string& dim, Value value) { df_->handle_set(*this, dim, std::move(value)); }

ObjectState ObjectHandle::state() const { return df_->handle_state(*this); }

// ---- dataframe ----

Dataframe::Dataframe(SchemaRegistry registry, DataframeOptions options)
    : registry_(std::move(registry)),
      options_(std::move(options)),
      graph_(&registry_, options_.ids ? options_.ids : VersionGraph::IdSource(random_version_id)),
      base_version_(kRootVersion) {
  graph_.update_ref(kSnapshotRef, base_version_);
}

void Dataframe::check_handle(const ObjectHandle& h) const {
  if (h.generation_ != generation_) {
    throw Error(ErrorCode::stale_handle, "handle for " + to_string(h.key_) + " predates the last checkout");
  }
}

Value Dataframe::handle_get(const ObjectHandle& h, const std::string& dim) const {
  return handle_state(h).at(dim);
}

ObjectState Dataframe::handle_state(const ObjectHandle& h) const {
  std::lock_guard lock(data_mutex_);
  check_handle(h);
  const auto* obj = materialized_.find(h.key_);
  if (obj == nullptr) throw Error(ErrorCode::not_found, to_string(h.key_) + " was deleted");
  return *obj;
}

void Dataframe::handle_set(const ObjectHandle& h, const std::string& dim, Value value) {
  const auto& schema = registry_.at(h.key_.type_name);
  if (dim == schema.primary_key) {
    throw Error(ErrorCode::invalid_argument, "primary key of " + to_string(h.key_) + " is immutable");
  }
  const auto* d = schema.find(dim);
  if (d == nullptr) throw Error(ErrorCode::invalid_argument, "'" + schema.name + "' has no dimension '" + dim + "'");
  if (d->kind == ValueKind::floating && kind_of(value) == ValueKind::integer) {
    value = static_cast<double>(std::get<std::int64_t>(value));
  }
  if (kind_of(value) != d->kind) {
    throw Error(ErrorCode::invalid_argument, "dimension '" + dim + "' expects " + std::string(to_string(d->kind)));
  }

  std::lock_guard lock(data_mutex_);
  check_handle(h);
  const auto* obj = materialized_.find(h.key_);
  if (obj == nullptr) throw Error(ErrorCode::not_found, to_string(h.key_) + " was deleted");
  if (obj->at(dim) == value) return;
  Diff delta;
  delta.set(h.key_, ObjectDelta::modified({{dim, std::move(value)}}));
  stage(delta);
}

void Dataframe::stage(const Diff& delta) {
  materialized_ = apply_diff(materialized_, delta);
  staged_ = compose_diffs(staged_, delta);
}

std::optional<ObjectHandle> Dataframe::read_one(std::string_view type, const Value& pkey) {
  registry_.at(type);
  std::lock_guard lock(data_mutex_);
  ObjectKey key{std::string(type), pkey};
  if (!materialized_.contains(key)) return std::nullopt;
  return ObjectHandle(this, std::move(key), generation_);
}

std::vector<ObjectHandle> Dataframe::read_all(std::string_view type) {
  registry_.at(type);
  std::lock_guard lock(data_mutex_);
  std::vector<ObjectHandle> out;
  if (const auto* objs = materialized_.objects(std::string(type))) {
    for (const auto& [pkey, obj] : *objs) out.push_back(ObjectHandle(this, obj.key(), generation_));
  }
  return out;
}

void Dataframe::add_one(ObjectState obj) { add_many({std::move(obj)}); }

void Dataframe::add_many(std::vector<ObjectState> objs) {
  Diff delta;
  for (auto& obj : objs) {
    registry_.validate(obj);
    if (delta.find(obj.key()) != nullptr) {
      throw Error(ErrorCode::duplicate, to_string(obj.key()) + " added twice");
    }
    delta.set(obj.key(), ObjectDelta::added(std::move(obj.dims)));
  }
  std::lock_guard lock(data_mutex_);
  for (const auto& [key, _] : delta) {
    if (materialized_.contains(key)) throw Error(ErrorCode::duplicate, to_string(key) + " already exists");
  }
  stage(delta);
}

void Dataframe::delete_one(std::string_view type, const Value& pkey) {
  registry_.at(type);
  std::lock_guard lock(data_mutex_);
  ObjectKey key{std::string(type), pkey};
  if (!materialized_.contains(key)) throw Error(ErrorCode::not_found, to_string(key) + " does not exist");
  Diff delta;
  delta.set(std::move(key), ObjectDelta::deleted());
  stage(delta);
}

void Dataframe::delete_all(std::string_view type) {
  registry_.at(type);
  std::lock_guard lock(data_mutex_);
  Diff delta;
  if (const auto* objs = materialized_.objects(std::string(type))) {
    for (const auto& [pkey, obj] : *objs) delta.set(obj.key(), ObjectDelta::deleted());
  }
  stage(delta);
}

// ---- local primitives ----

void Dataframe::commit() {
  StepGate gate(*this, StepKind::commit, Flow::app);
  nlohmann::json payload;
  {
    std::lock_guard lock(data_mutex_);
    payload = {{"base", base_version_}, {"diff", diff_to_json(staged_)}};
  }
  gate.advance(std::move(payload));  // receive-data
  Diff received;
  VersionId base;
  {
    std::lock_guard lock(data_mutex_);
    received = staged_;
    base = base_version_;
  }

  gate.advance();  // extend-graph
  {
    std::lock_guard lock(data_mutex_);
    if (!received.empty()) {
      auto v = graph_.extend(base, received);
      if (graph_.head() != v) {
        // Remote changes reached the history since the last checkout.
        auto report = graph_.receive_update(base, v, {}, options_.resolver);
        v = report.merged_version;
        materialized_ = graph_.state_at(v);
        ++generation_;
      }
      base_version_ = v;
      staged_ = Diff{};
      graph_.update_ref(kSnapshotRef, base_version_);
    }
  }

  gate.advance();  // garbage-collect
  {
    std::lock_guard lock(data_mutex_);
    collect_garbage();
  }
  gate.finish();
}

void Dataframe::checkout() {
  {
    std::lock_guard lock(data_mutex_);
    if (!staged_.empty()) {
      throw Error(ErrorCode::precondition, "checkout with " + std::to_string(staged_.size()) +
                                               " uncommitted change(s); commit first");
    }
  }
  StepGate gate(*this, StepKind::checkout, Flow::app);
  gate.advance();  // read-head
  VersionId target;
  {
    std::lock_guard lock(data_mutex_);
    target = graph_.head();
  }

  gate.advance({{"head", target}});  // apply-to-snapshot
  {
    std::lock_guard lock(data_mutex_);
    if (target != base_version_) {
      materialized_ = graph_.state_at(target);
      base_version_ = target;
      graph_.update_ref(kSnapshotRef, base_version_);
    }
    ++generation_;
  }
  gate.finish();
}

void Dataframe::collect_garbage() { graph_.garbage_collect(); }

std::string Dataframe::remote_ref() const {
  if (!options_.remote) throw Error(ErrorCode::precondition, "node '" + node_name() + "' has no remote");
  if (!options_.network) throw Error(ErrorCode::precondition, "node '" + node_name() + "' has no network");
  return *options_.remote;
}

std::string Dataframe::next_step_id() { return node_name() + "#" + std::to_string(++step_counter_); }

// ---- sync ----

namespace {

[[noreturn]] void throw_reply(const ErrorReply& e, const std::string& peer) {
  auto code = e.code == "unknown_version" ? ErrorCode::unknown_version : ErrorCode::network;
  throw Error(code, "peer " + peer + " replied " + e.code + ": " + e.detail);
}

}  // namespace

void Dataframe::push() {
  auto remote = remote_ref();
  StepGate gate(*this, StepKind::push, Flow::app);

  auto build = [&] {
    std::lock_guard lock(data_mutex_);
    auto from = graph_.ref(remote).value_or(kRootVersion);
    if (!graph_.contains(from)) from = kRootVersion;
    auto [diff, end] = graph_.delta_between(from);
    return PushRequest{node_name(), from, end, std::move(diff)};
  };

  auto request = build();
  // Under a debugger the controller relays the request and hands back the reply.
  auto decision = gate.advance(to_json(SyncMessage{request}), remote);  // send-request
  auto reply = decision.forwarded_reply ? *decision.forwarded_reply
                                        : options_.network->send(remote, request, gate.step_id());
  if (const auto* e = std::get_if<ErrorReply>(&reply); e != nullptr && e->code == "unknown_version") {
    // The peer no longer knows what we last sent it; start over from ROOT.
    {
      std::lock_guard lock(data_mutex_);
      graph_.remove_ref(remote);
    }
    request = build();
    reply = options_.network->send(remote, request, gate.step_id());
  }
  if (const auto* e = std::get_if<ErrorReply>(&reply)) throw_reply(*e, remote);
  if (!std::holds_alternative<PushAck>(reply)) {
    throw Error(ErrorCode::protocol, "expected push_ack from " + remote + ", got " + message_type(reply));
  }

  gate.advance(to_json(reply));  // receive-ack
  {
    std::lock_guard lock(data_mutex_);
    if (graph_.contains(request.end_version)) graph_.update_ref(remote, request.end_version);
  }
  gate.finish();
}

MergeReport Dataframe::receive(StepGate& gate, const VersionId& start, const VersionId& end, const Diff& diff,
                               const nlohmann::json& payload) {
  gate.advance(payload);  // receive-data
  MergePlan plan;
  {
    std::lock_guard lock(data_mutex_);
    plan = graph_.stage_incoming(start, end, diff);
  }

  gate.advance();  // detect-conflict
  {
    std::lock_guard lock(data_mutex_);
    graph_.analyze(plan);
  }

  State merged;
  if (plan.conflicted()) {
    gate.insert_next(phase::run_merge);
    nlohmann::json conflicts = nlohmann::json::array();
    for (const auto& key : plan.report.concurrent) conflicts.push_back(key_string(key));
    gate.advance({{"conflicts", conflicts}});  // run-merge
  }
  {
    std::lock_guard lock(data_mutex_);
    merged = graph_.resolve(plan, options_.resolver);
  }

  gate.advance();  // extend-graph
  MergeReport report;
  {
    std::lock_guard lock(data_mutex_);
    report = graph_.complete(plan, merged);
  }
  return report;
}

void Dataframe::fetch() {
  auto remote = remote_ref();
  StepGate gate(*this, StepKind::fetch, Flow::app);

  auto build = [&] {
    std::lock_guard lock(data_mutex_);
    auto from = graph_.ref(remote).value_or(kRootVersion);
    if (!graph_.contains(from)) from = kRootVersion;
    return FetchRequest{node_name(), from};
  };

  auto request = build();
  auto decision = gate.advance(to_json(SyncMessage{request}), remote);  // send-request
  auto reply = decision.forwarded_reply ? *decision.forwarded_reply
                                        : options_.network->send(remote, request, gate.step_id());
  if (const auto* e = std::get_if<ErrorReply>(&reply)) throw_reply(*e, remote);
  const auto* response = std::get_if<FetchResponse>(&reply);
  if (response == nullptr) {
    throw Error(ErrorCode::protocol, "expected fetch_response from " + remote + ", got " + message_type(reply));
  }

  receive(gate, response->start_version, response->new_head, response->diff, to_json(reply));
  {
    std::lock_guard lock(data_mutex_);
    graph_.update_ref(remote, response->new_head);
  }

  gate.advance();  // garbage-collect
  {
    std::lock_guard lock(data_mutex_);
    collect_garbage();
  }
  gate.finish();
}

void Dataframe::pull() {
  fetch();
  checkout();
}

// ---- inbound ----

SyncMessage Dataframe::serve(const SyncMessage& msg, const std::string& origin_step) {
  if (const auto* push = std::get_if<PushRequest>(&msg)) return respond_to_push(*push, origin_step);
  if (const auto* fetch = std::get_if<FetchRequest>(&msg)) return respond_to_fetch(*fetch, origin_step);
  if (const auto* rollback = std::get_if<RollbackRequest>(&msg)) return apply_rollback(*rollback);
  return ErrorReply{"protocol", "node '" + node_name() + "' cannot serve " + message_type(msg)};
}

SyncMessage Dataframe::respond_to_push(const PushRequest& req, const std::string& origin) {
  StepGate gate(*this, StepKind::respond_to_push, Flow::server, origin);
  try {
    receive(gate, req.start_version, req.end_version, req.diff, to_json(SyncMessage{req}));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::unknown_version) return ErrorReply{"unknown_version", e.what()};
    throw;
  }
  {
    std::lock_guard lock(data_mutex_);
    graph_.update_ref(req.sender_id, req.end_version);
  }

  gate.advance();  // garbage-collect
  PushAck ack;
  {
    std::lock_guard lock(data_mutex_);
    collect_garbage();
    ack.accepted_head = graph_.head();
  }
  gate.finish();
  return ack;
}

SyncMessage Dataframe::respond_to_fetch(const FetchRequest& req, const std::string& origin) {
  StepGate gate(*this, StepKind::respond_to_fetch, Flow::server, origin);
  gate.advance(to_json(SyncMessage{req}));  // compute-delta
  FetchResponse response;
  {
    std::lock_guard lock(data_mutex_);
    response.start_version = graph_.contains(req.from_version) ? req.from_version : kRootVersion;
    std::tie(response.diff, response.new_head) = graph_.delta_between(response.start_version);
  }

  SyncMessage reply{response};
  gate.advance(to_json(reply));  // send-response
  {
    std::lock_guard lock(data_mutex_);
    graph_.update_ref(req.requester_id, response.new_head);
  }
  gate.finish();
  return reply;
}

SyncMessage Dataframe::apply_rollback(const RollbackRequest& req) {
  std::unique_lock step(step_mutex_, std::try_to_lock);
  if (!step.owns_lock()) {
    throw Error(ErrorCode::precondition, "node '" + node_name() + "' is in the middle of a step");
  }
  std::lock_guard lock(data_mutex_);
  graph_.rollback(req.version);
  if (!graph_.contains(base_version_)) {
    // Keep what the application sees; re-express it against the new base.
    base_version_ = req.version;
    staged_ = diff_states(graph_.state_at(base_version_), materialized_);
  }
  graph_.update_ref(kSnapshotRef, base_version_);
  return RollbackAck{graph_.head(), graph_.to_json()};
}

// ---- inspection ----

nlohmann::json Dataframe::history() const {
  std::lock_guard lock(data_mutex_);
  return graph_.to_json();
}

VersionId Dataframe::head() const {
  std::lock_guard lock(data_mutex_);
  return graph_.head();
}

VersionId Dataframe::snapshot_version() const {
  std::lock_guard lock(data_mutex_);
  return base_version_;
}

Diff Dataframe::staged() const {
  std::lock_guard lock(data_mutex_);
  return staged_;
}

State Dataframe::snapshot_state() const {
  std::lock_guard lock(data_mutex_);
  return materialized_;
}

State Dataframe::head_state() const {
  std::lock_guard lock(data_mutex_);
  return graph_.state_at(graph_.head());
}

VersionGraph Dataframe::graph() const {
  std::lock_guard lock(data_mutex_);
  return graph_;
}

}  // namespace got
