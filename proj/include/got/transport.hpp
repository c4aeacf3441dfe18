#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>

#include "got/sync.hpp"

namespace got {

/// Handles one inbound sync message. `origin_step` is non-empty when the
/// controller relayed the message on behalf of a debugged step.
using SyncHandler = std::function<SyncMessage(const SyncMessage& msg, const std::string& origin_step)>;

/// How nodes expose their sync endpoint and reach peers.
class Network {
 public:
  virtual ~Network() = default;

  /// Starts serving `handler`; port 0 picks any free port. Returns the address
  /// peers use to reach it.
  virtual std::string listen(const std::string& node_name, std::uint16_t port, SyncHandler handler) = 0;
  virtual void close(const std::string& address) = 0;
  virtual SyncMessage send(const std::string& address, const SyncMessage& msg,
                           const std::string& origin_step = {}) = 0;
};

/// Nodes sharing one process; messages are delivered by direct call.
class InProcessNetwork : public Network {
 public:
  std::string listen(const std::string& node_name, std::uint16_t port, SyncHandler handler) override;
  void close(const std::string& address) override;
  SyncMessage send(const std::string& address, const SyncMessage& msg,
                   const std::string& origin_step = {}) override;

 private:
  std::mutex mutex_;
  std::map<std::string, SyncHandler> handlers_;
};

/// Node side of the debugger link.
class DebugChannel {
 public:
  virtual ~DebugChannel() = default;
  virtual void register_node(const NodeRegistration& reg) = 0;
  /// Blocks until the controller decides.
  virtual GateDecision submit(const DebugEnvelope& env) = 0;
};

}  // namespace got
