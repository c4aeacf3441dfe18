#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "got/transport.hpp"

namespace got {

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address);

/// POST /sync over HTTP/1.1 with JSON bodies.
class HttpNetwork : public Network {
 public:
  explicit HttpNetwork(std::string bind_host = "127.0.0.1");
  ~HttpNetwork() override;

  std::string listen(const std::string& node_name, std::uint16_t port, SyncHandler handler) override;
  void close(const std::string& address) override;
  SyncMessage send(const std::string& address, const SyncMessage& msg,
                   const std::string& origin_step = {}) override;

 private:
  struct Listener;

  std::string bind_host_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Listener>> listeners_;
};

/// Talks to a controller's POST /register and POST /step.
class HttpDebugChannel : public DebugChannel {
 public:
  explicit HttpDebugChannel(std::string controller_address);

  void register_node(const NodeRegistration& reg) override;
  GateDecision submit(const DebugEnvelope& env) override;

 private:
  std::string host_;
  std::uint16_t port_;
};

}  // namespace got
