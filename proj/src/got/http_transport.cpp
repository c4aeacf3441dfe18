#include "got/http_transport.hpp"

#include <thread>

#include <httplib.h>

#include "got/error.hpp"
#include "got/serialize.hpp"

namespace got {

namespace {

constexpr const char* kOriginHeader = "X-Gotcha-Origin";
constexpr auto kConnectTimeout = std::chrono::seconds(5);
// Debug gates are held by the controller until a human steps.
constexpr auto kHeldReadTimeout = std::chrono::hours(24);

json post_json(const std::string& host, std::uint16_t port, const std::string& path, const json& body,
               const httplib::Headers& headers = {}) {
  httplib::Client client(host, port);
  client.set_connection_timeout(kConnectTimeout);
  client.set_read_timeout(kHeldReadTimeout);
  client.set_write_timeout(kConnectTimeout);
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::network, "POST " + host + ":" + std::to_string(port) + path +
                                        " failed: " + httplib::to_string(res.error()));
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (res->status >= 400) {
    std::string detail = parsed.is_object() ? parsed.value("detail", res->body) : res->body;
    auto code = res->status == 409 ? ErrorCode::conflict
                : res->status == 404 ? ErrorCode::not_found
                                     : ErrorCode::protocol;
    throw Error(code, "POST " + path + " -> " + std::to_string(res->status) + ": " + detail);
  }
  if (parsed.is_discarded()) throw Error(ErrorCode::protocol, "non-JSON reply from " + path);
  return parsed;
}

}  // namespace

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw Error(ErrorCode::invalid_argument, "address '" + address + "' is not host:port");
  }
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::invalid_argument, "bad port in '" + address + "'");
  return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

struct HttpNetwork::Listener {
  httplib::Server server;
  std::thread thread;
};

HttpNetwork::HttpNetwork(std::string bind_host) : bind_host_(std::move(bind_host)) {}

HttpNetwork::~HttpNetwork() {
  std::map<std::string, std::unique_ptr<Listener>> listeners;
  {
    std::lock_guard lock(mutex_);
    listeners.swap(listeners_);
  }
  for (auto& [_, l] : listeners) {
    l->server.stop();
    if (l->thread.joinable()) l->thread.join();
  }
}

std::string HttpNetwork::listen(const std::string& node_name, std::uint16_t port, SyncHandler handler) {
  auto listener = std::make_unique<Listener>();
  listener->server.Post("/sync", [handler = std::move(handler), node_name](const httplib::Request& req,
                                                                           httplib::Response& res) {
    json reply;
    try {
      auto msg = sync_message_from_json(json::parse(req.body));
      reply = to_json(handler(msg, req.get_header_value(kOriginHeader)));
    } catch (const json::exception& e) {
      res.status = 400;
      reply = to_json(SyncMessage{ErrorReply{"protocol", e.what()}});
    } catch (const Error& e) {
      res.status = e.code() == ErrorCode::protocol ? 400 : 200;
      reply = to_json(SyncMessage{ErrorReply{std::string(to_string(e.code())), e.what()}});
    } catch (const std::exception& e) {
      res.status = 500;
      reply = to_json(SyncMessage{ErrorReply{"internal", e.what()}});
    }
    res.set_content(reply.dump(), "application/json");
  });

  int bound = port == 0 ? listener->server.bind_to_any_port(bind_host_)
                        : (listener->server.bind_to_port(bind_host_, port) ? port : -1);
  if (bound <= 0) {
    throw Error(ErrorCode::network, "cannot listen on " + bind_host_ + ":" + std::to_string(port));
  }
  auto* server = &listener->server;
  listener->thread = std::thread([server] { server->listen_after_bind(); });
  server->wait_until_ready();

  std::string address = bind_host_ + ":" + std::to_string(bound);
  std::lock_guard lock(mutex_);
  listeners_[address] = std::move(listener);
  return address;
}

void HttpNetwork::close(const std::string& address) {
  std::unique_ptr<Listener> l;
  {
    std::lock_guard lock(mutex_);
    auto it = listeners_.find(address);
    if (it == listeners_.end()) return;
    l = std::move(it->second);
    listeners_.erase(it);
  }
  l->server.stop();
  if (l->thread.joinable()) l->thread.join();
}

SyncMessage HttpNetwork::send(const std::string& address, const SyncMessage& msg,
                              const std::string& origin_step) {
  auto [host, port] = split_host_port(address);
  httplib::Headers headers;
  if (!origin_step.empty()) headers.emplace(kOriginHeader, origin_step);
  httplib::Client client(host, port);
  client.set_connection_timeout(kConnectTimeout);
  client.set_read_timeout(kHeldReadTimeout);
  auto res = client.Post("/sync", headers, to_json(msg).dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::network, "sync with " + address + " failed: " + httplib::to_string(res.error()));
  }
  auto parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw Error(ErrorCode::protocol, "non-JSON sync reply from " + address);
  return sync_message_from_json(parsed);
}

HttpDebugChannel::HttpDebugChannel(std::string controller_address) {
  std::tie(host_, port_) = split_host_port(controller_address);
}

void HttpDebugChannel::register_node(const NodeRegistration& reg) {
  post_json(host_, port_, "/register", to_json(reg));
}

GateDecision HttpDebugChannel::submit(const DebugEnvelope& env) {
  return gate_decision_from_json(post_json(host_, port_, "/step", to_json(env)));
}

}  // namespace got
