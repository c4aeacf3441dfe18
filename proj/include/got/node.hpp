#pragma once

#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "got/dataframe.hpp"

namespace got {

using AppFunction = std::function<void(Dataframe& df, const std::vector<std::string>& args)>;

struct NodeConfig {
  std::string name;
  AppFunction app;
  std::vector<std::string> args;
  SchemaRegistry registry;
  /// Serve sync requests on this port (0 picks one). Debugged nodes always
  /// listen so the controller can reach them.
  std::optional<std::uint16_t> server_port;
  std::optional<std::string> remote;
  Resolver resolver;
  std::shared_ptr<Network> network;
  std::shared_ptr<DebugChannel> debug;
  VersionGraph::IdSource ids = random_version_id;
};

/// Hosts one dataframe: serves peers, registers with the debugger and runs the
/// application function to completion.
class Node {
 public:
  explicit Node(NodeConfig config);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Runs the application on the calling thread; rethrows its failure.
  void run();
  void start_async();
  void join();

  const std::string& name() const { return config_.name; }
  /// Sync address, or empty when the node does not listen.
  const std::string& address() const { return address_; }
  Dataframe& dataframe() { return *df_; }

 private:
  void open();
  void close();

  NodeConfig config_;
  std::unique_ptr<Dataframe> df_;
  std::string address_;
  std::thread thread_;
  std::exception_ptr failure_;
};

}  // namespace got
