#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "got/diff.hpp"
#include "got/version_graph.hpp"

namespace got {

struct FetchRequest {
  std::string requester_id;
  VersionId from_version;
};

// `start_version` is the version the diff applies to. It differs from the
// request's `from_version` only when the responder fell back to ROOT.
struct FetchResponse {
  VersionId start_version;
  Diff diff;
  VersionId new_head;
};

struct PushRequest {
  std::string sender_id;
  VersionId start_version;
  VersionId end_version;
  Diff diff;
};

struct PushAck {
  VersionId accepted_head;
};

struct ErrorReply {
  std::string code;
  std::string detail;
};

// Debug channel only: the controller asking a node to roll its history back.
struct RollbackRequest {
  VersionId version;
};

struct RollbackAck {
  VersionId head;
  nlohmann::json history;
};

using SyncMessage = std::variant<FetchRequest, FetchResponse, PushRequest, PushAck, ErrorReply,
                                 RollbackRequest, RollbackAck>;

nlohmann::json to_json(const SyncMessage& msg);
SyncMessage sync_message_from_json(const nlohmann::json& j);
std::string message_type(const SyncMessage& msg);

enum class StepKind { commit, checkout, push, fetch, respond_to_push, respond_to_fetch };

std::string_view to_string(StepKind kind);
StepKind parse_step_kind(std::string_view text);

namespace phase {
inline constexpr const char* receive_data = "receive-data";
inline constexpr const char* extend_graph = "extend-graph";
inline constexpr const char* garbage_collect = "garbage-collect";
inline constexpr const char* detect_conflict = "detect-conflict";
inline constexpr const char* run_merge = "run-merge";
inline constexpr const char* compute_delta = "compute-delta";
inline constexpr const char* send_response = "send-response";
inline constexpr const char* send_request = "send-request";
inline constexpr const char* receive_ack = "receive-ack";
inline constexpr const char* read_head = "read-head";
inline constexpr const char* apply_to_snapshot = "apply-to-snapshot";
}  // namespace phase

/// Phase names of a step as first announced; run-merge is inserted later when
/// a conflict is detected.
std::vector<std::string> initial_phases(StepKind kind);

enum class Flow { app, server };

/// One message on the debug channel. `event` is "phase" for a gate (the node
/// blocks until granted; phase_index == phases.size() reports completion) or
/// "exit" when the node's application function has returned.
struct DebugEnvelope {
  std::string event = "phase";
  std::string node_id;
  std::string step_id;
  StepKind step_kind = StepKind::commit;
  Flow flow = Flow::app;
  std::size_t phase_index = 0;
  std::vector<std::string> phases;
  // Step id of the remote step whose request this step is serving.
  std::string origin_step;
  // Set on send-request phases: the peer the controller forwards `payload` to.
  std::string forward_to;
  nlohmann::json payload;
  nlohmann::json history;
  std::string error;
};

nlohmann::json to_json(const DebugEnvelope& env);
DebugEnvelope debug_envelope_from_json(const nlohmann::json& j);

struct GateDecision {
  std::string action = "proceed";  // proceed | hold | forward | abort
  std::optional<SyncMessage> forwarded_reply;
};

nlohmann::json to_json(const GateDecision& d);
GateDecision gate_decision_from_json(const nlohmann::json& j);

struct NodeRegistration {
  std::string name;
  std::string address;
  std::optional<std::string> remote;
  std::vector<TypeSchema> schemas;
};

nlohmann::json to_json(const NodeRegistration& r);
NodeRegistration node_registration_from_json(const nlohmann::json& j);

}  // namespace got
