#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "got/node.hpp"
#include "got/transport.hpp"
#include "gotcha/controller.hpp"
#include "wordcount/wordcount.hpp"

namespace wordcount {

inline const std::vector<std::string> kSampleInput = {"foo", "bar", "bar", "baz", "bar", "bar"};

inline const std::string kGrouperName = "Grouper";
std::string worker_name(int index);

struct NodeSettings {
  std::string name;
  std::optional<std::uint16_t> port;
  std::optional<std::string> remote;
  std::string resolver = "default";
  std::shared_ptr<got::Network> network;
  std::shared_ptr<got::DebugChannel> debug;
  AppOptions app;
};

got::NodeConfig grouper_node(NodeSettings settings, std::vector<std::string> lines, int num_workers,
                             std::ostream& out);
got::NodeConfig worker_node(NodeSettings settings, int index, int num_workers);

struct ClusterConfig {
  std::vector<std::string> lines = kSampleInput;
  int num_workers = 2;
  std::string resolver = "fixed";
};

/// A Grouper plus its workers, started together.
class Cluster {
 public:
  virtual ~Cluster() = default;
  /// Launches the Grouper, waits until it accepts connections, then the workers.
  virtual void start() = 0;
  /// Blocks until every node finished; throws if one failed or time ran out.
  virtual void wait(std::chrono::milliseconds timeout) = 0;
  /// Everything the Grouper printed.
  virtual std::string output() const = 0;
  virtual std::vector<std::string> node_names() const;
  virtual const ClusterConfig& config() const = 0;
};

/// Threads in this process. With a controller, nodes are debugged through it;
/// the controller must have been built on the same `network`.
std::unique_ptr<Cluster> make_thread_cluster(ClusterConfig config, std::shared_ptr<got::InProcessNetwork> network,
                                             gotcha::Controller* controller = nullptr);

struct ProcessOptions {
  /// The got-wordcount executable.
  std::filesystem::path executable;
  /// GOTCHA_GCN for the children; empty runs them undebugged.
  std::string controller_address;
  std::filesystem::path work_dir = std::filesystem::temp_directory_path();
};

/// One OS process per node, talking HTTP.
std::unique_ptr<Cluster> make_process_cluster(ClusterConfig config, ProcessOptions options);

/// Asks the OS for a currently free TCP port on 127.0.0.1.
std::uint16_t free_port();

}  // namespace wordcount
