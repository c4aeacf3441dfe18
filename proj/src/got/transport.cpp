#include "got/transport.hpp"

#include "got/error.hpp"

namespace got {

std::string InProcessNetwork::listen(const std::string& node_name, std::uint16_t port, SyncHandler handler) {
  std::string address = "inproc://" + node_name;
  if (port != 0) address += ":" + std::to_string(port);
  std::lock_guard lock(mutex_);
  if (!handlers_.emplace(address, std::move(handler)).second) {
    throw Error(ErrorCode::duplicate, "address " + address + " already in use");
  }
  return address;
}

void InProcessNetwork::close(const std::string& address) {
  std::lock_guard lock(mutex_);
  handlers_.erase(address);
}

SyncMessage InProcessNetwork::send(const std::string& address, const SyncMessage& msg,
                                   const std::string& origin_step) {
  SyncHandler handler;
  {
    std::lock_guard lock(mutex_);
    auto it = handlers_.find(address);
    if (it == handlers_.end()) throw Error(ErrorCode::network, "no node listening at " + address);
    handler = it->second;
  }
  try {
    return handler(msg, origin_step);
  } catch (const Error& e) {
    return ErrorReply{std::string(to_string(e.code())), e.what()};
  }
}

}  // namespace got
