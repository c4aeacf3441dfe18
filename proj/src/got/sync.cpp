#include "got/sync.hpp"

#include "got/error.hpp"
#include "got/serialize.hpp"

namespace got {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string message_type(const SyncMessage& msg) {
  return std::visit(overloaded{
                        [](const FetchRequest&) { return "fetch_request"; },
                        [](const FetchResponse&) { return "fetch_response"; },
                        [](const PushRequest&) { return "push_request"; },
                        [](const PushAck&) { return "push_ack"; },
                        [](const ErrorReply&) { return "error"; },
                        [](const RollbackRequest&) { return "rollback_request"; },
                        [](const RollbackAck&) { return "rollback_ack"; },
                    },
                    msg);
}

json to_json(const SyncMessage& msg) {
  json body = std::visit(
      overloaded{
          [](const FetchRequest& m) -> json {
            return {{"requester_id", m.requester_id}, {"from_version", m.from_version}};
          },
          [](const FetchResponse& m) -> json {
            return {{"start_version", m.start_version},
                    {"diff", diff_to_json(m.diff)},
                    {"new_head", m.new_head}};
          },
          [](const PushRequest& m) -> json {
            return {{"sender_id", m.sender_id},
                    {"start_version", m.start_version},
                    {"end_version", m.end_version},
                    {"diff", diff_to_json(m.diff)}};
          },
          [](const PushAck& m) -> json { return {{"accepted_head", m.accepted_head}}; },
          [](const ErrorReply& m) -> json { return {{"code", m.code}, {"detail", m.detail}}; },
          [](const RollbackRequest& m) -> json { return {{"version", m.version}}; },
          [](const RollbackAck& m) -> json { return {{"head", m.head}, {"history", m.history}}; },
      },
      msg);
  body["type"] = message_type(msg);
  return body;
}

SyncMessage sync_message_from_json(const json& j) {
  try {
    auto type = j.at("type").get<std::string>();
    if (type == "fetch_request") {
      return FetchRequest{j.at("requester_id").get<std::string>(), j.at("from_version").get<std::string>()};
    }
    if (type == "fetch_response") {
      return FetchResponse{j.at("start_version").get<std::string>(), diff_from_json(j.at("diff")),
                           j.at("new_head").get<std::string>()};
    }
    if (type == "push_request") {
      return PushRequest{j.at("sender_id").get<std::string>(), j.at("start_version").get<std::string>(),
                         j.at("end_version").get<std::string>(), diff_from_json(j.at("diff"))};
    }
    if (type == "push_ack") return PushAck{j.at("accepted_head").get<std::string>()};
    if (type == "error") return ErrorReply{j.at("code").get<std::string>(), j.value("detail", "")};
    if (type == "rollback_request") return RollbackRequest{j.at("version").get<std::string>()};
    if (type == "rollback_ack") return RollbackAck{j.at("head").get<std::string>(), j.value("history", json{})};
    throw Error(ErrorCode::protocol, "unknown message type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::protocol, std::string("malformed sync message: ") + e.what());
  }
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::commit: return "commit";
    case StepKind::checkout: return "checkout";
    case StepKind::push: return "push";
    case StepKind::fetch: return "fetch";
    case StepKind::respond_to_push: return "respond-to-push";
    case StepKind::respond_to_fetch: return "respond-to-fetch";
  }
  return "?";
}

StepKind parse_step_kind(std::string_view text) {
  for (auto k : {StepKind::commit, StepKind::checkout, StepKind::push, StepKind::fetch,
                 StepKind::respond_to_push, StepKind::respond_to_fetch}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::protocol, "unknown step kind '" + std::string(text) + "'");
}

std::vector<std::string> initial_phases(StepKind kind) {
  using namespace phase;
  switch (kind) {
    case StepKind::commit: return {receive_data, extend_graph, garbage_collect};
    case StepKind::checkout: return {read_head, apply_to_snapshot};
    case StepKind::push: return {send_request, receive_ack};
    case StepKind::fetch:
      return {send_request, receive_data, detect_conflict, extend_graph, garbage_collect};
    case StepKind::respond_to_push: return {receive_data, detect_conflict, extend_graph, garbage_collect};
    case StepKind::respond_to_fetch: return {compute_delta, send_response};
  }
  return {};
}

json to_json(const DebugEnvelope& env) {
  json j = {{"event", env.event},         {"node_id", env.node_id},
            {"step_id", env.step_id},     {"step_kind", to_string(env.step_kind)},
            {"flow", env.flow == Flow::app ? "app" : "server"},
            {"phase_index", env.phase_index},
            {"phases", env.phases},       {"payload", env.payload},
            {"history", env.history}};
  if (!env.origin_step.empty()) j["origin_step"] = env.origin_step;
  if (!env.forward_to.empty()) j["forward_to"] = env.forward_to;
  if (!env.error.empty()) j["error"] = env.error;
  return j;
}

DebugEnvelope debug_envelope_from_json(const json& j) {
  try {
    DebugEnvelope env;
    env.event = j.value("event", "phase");
    env.node_id = j.at("node_id").get<std::string>();
    if (env.event == "phase") {
      env.step_id = j.at("step_id").get<std::string>();
      env.step_kind = parse_step_kind(j.at("step_kind").get<std::string>());
      env.phase_index = j.at("phase_index").get<std::size_t>();
      env.phases = j.at("phases").get<std::vector<std::string>>();
    }
    env.flow = j.value("flow", "app") == "server" ? Flow::server : Flow::app;
    env.origin_step = j.value("origin_step", "");
    env.forward_to = j.value("forward_to", "");
    env.payload = j.value("payload", json{});
    env.history = j.value("history", json{});
    env.error = j.value("error", "");
    return env;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::protocol, std::string("malformed debug envelope: ") + e.what());
  }
}

json to_json(const GateDecision& d) {
  json j = {{"action", d.action}};
  if (d.forwarded_reply) j["forwarded_reply"] = to_json(*d.forwarded_reply);
  return j;
}

GateDecision gate_decision_from_json(const json& j) {
  GateDecision d;
  d.action = j.at("action").get<std::string>();
  if (j.contains("forwarded_reply")) d.forwarded_reply = sync_message_from_json(j.at("forwarded_reply"));
  return d;
}

json to_json(const NodeRegistration& r) {
  json schemas = json::array();
  for (const auto& s : r.schemas) schemas.push_back(schema_to_json(s));
  json j = {{"name", r.name}, {"address", r.address}, {"schemas", schemas}};
  j["remote"] = r.remote ? json(*r.remote) : json(nullptr);
  return j;
}

NodeRegistration node_registration_from_json(const json& j) {
  NodeRegistration r;
  r.name = j.at("name").get<std::string>();
  r.address = j.value("address", "");
  if (j.contains("remote") && j.at("remote").is_string()) r.remote = j.at("remote").get<std::string>();
  if (j.contains("schemas")) {
    for (const auto& s : j.at("schemas")) r.schemas.push_back(schema_from_json(s));
  }
  return r;
}

}  // namespace got
