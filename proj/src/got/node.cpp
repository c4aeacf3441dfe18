#include "got/node.hpp"

#include "got/error.hpp"

namespace got {

Node::Node(NodeConfig config) : config_(std::move(config)) {
  if (config_.name.empty()) throw Error(ErrorCode::invalid_argument, "node name is empty");
  if (!config_.app) throw Error(ErrorCode::invalid_argument, "node '" + config_.name + "' has no application");
  if ((config_.remote || config_.server_port || config_.debug) && !config_.network) {
    throw Error(ErrorCode::invalid_argument, "node '" + config_.name + "' needs a network");
  }
  DataframeOptions options;
  options.node_name = config_.name;
  options.remote = config_.remote;
  options.resolver = config_.resolver;
  options.network = config_.network;
  options.debug = config_.debug;
  options.ids = config_.ids;
  df_ = std::make_unique<Dataframe>(config_.registry, std::move(options));
  open();
}

Node::~Node() {
  if (thread_.joinable()) thread_.join();
  close();
}

void Node::open() {
  if (!config_.server_port && !config_.debug) return;
  auto* df = df_.get();
  address_ = config_.network->listen(config_.name, config_.server_port.value_or(0),
                                     [df](const SyncMessage& msg, const std::string& origin) {
                                       return df->serve(msg, origin);
                                     });
}

void Node::close() {
  if (address_.empty()) return;
  config_.network->close(address_);
  address_.clear();
}

void Node::run() {
  std::exception_ptr failure;
  try {
    if (config_.debug) {
      NodeRegistration reg{config_.name, address_, config_.remote, {}};
      for (const auto& type : df_->registry().names()) reg.schemas.push_back(df_->registry().at(type));
      config_.debug->register_node(reg);
    }
    config_.app(*df_, config_.args);
  } catch (...) {
    failure = std::current_exception();
  }
  if (config_.debug) {
    DebugEnvelope env;
    env.event = "exit";
    env.node_id = config_.name;
    env.history = df_->history();
    if (failure) {
      try {
        std::rethrow_exception(failure);
      } catch (const std::exception& e) {
        env.error = e.what();
      } catch (...) {
        env.error = "unknown failure";
      }
    }
    try {
      config_.debug->submit(env);
    } catch (...) {
      // The controller may already be gone.
    }
  }
  close();
  if (failure) std::rethrow_exception(failure);
}

void Node::start_async() {
  if (thread_.joinable()) throw Error(ErrorCode::precondition, "node '" + config_.name + "' already started");
  thread_ = std::thread([this] {
    try {
      run();
    } catch (...) {
      failure_ = std::current_exception();
    }
  });
}

void Node::join() {
  if (thread_.joinable()) thread_.join();
  if (failure_) std::rethrow_exception(std::exchange(failure_, nullptr));
}

}  // namespace got
