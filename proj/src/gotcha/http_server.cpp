#include "gotcha/http_server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <list>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "got/error.hpp"
#include "got/serialize.hpp"

namespace gotcha {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using got::Error;
using got::ErrorCode;
using nlohmann::json;

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

constexpr std::size_t kBodyLimit = 64 * 1024 * 1024;

constexpr const char* kStubPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>gotcha</title></head>
<body>
<h1>gotcha controller</h1>
<p>No UI bundle configured (start with --ui-dir). JSON endpoints:</p>
<ul>
<li>GET /topology, GET /status, GET /breakpoints</li>
<li>GET /nodes/{name}/history, /steps, /state?version=ID</li>
<li>POST /control, /breakpoints, /nodes/{name}/reorder, /nodes/{name}/rollback</li>
<li>WebSocket /events</li>
</ul>
</body></html>
)";

std::string_view sv(beast::string_view s) { return {s.data(), s.size()}; }

std::string percent_decode(std::string_view in) {
  std::string out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '%' && i + 2 < in.size()) {
      out += static_cast<char>(std::stoi(std::string(in.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += in[i] == '+' ? ' ' : in[i];
    }
  }
  return out;
}

struct Target {
  std::vector<std::string> segments;
  std::map<std::string, std::string> query;
};

Target parse_target(std::string_view target) {
  Target t;
  auto q = target.find('?');
  auto path = target.substr(0, q);
  std::size_t pos = 0;
  while (pos < path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) t.segments.push_back(percent_decode(path.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (q != std::string_view::npos) {
    std::istringstream qs(std::string(target.substr(q + 1)));
    std::string pair;
    while (std::getline(qs, pair, '&')) {
      auto eq = pair.find('=');
      if (eq == std::string::npos) {
        t.query[percent_decode(pair)] = "";
      } else {
        t.query[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
      }
    }
  }
  return t;
}

Response make_response(const Request& req, http::status status, std::string body, std::string_view type) {
  Response res{status, req.version()};
  res.set(http::field::server, "gotcha");
  res.set(http::field::content_type, beast::string_view(type.data(), type.size()));
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, const json& body, http::status status = http::status::ok) {
  return make_response(req, status, body.dump(), "application/json");
}

Response error_response(const Request& req, http::status status, std::string_view code, const std::string& detail) {
  return json_response(req, {{"error", code}, {"detail", detail}}, status);
}

http::status status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found:
    case ErrorCode::unknown_version:
      return http::status::not_found;
    case ErrorCode::duplicate:
    case ErrorCode::precondition:
    case ErrorCode::conflict:
    case ErrorCode::stale_handle:
      return http::status::conflict;
    case ErrorCode::invalid_argument:
    case ErrorCode::invalid_diff:
    case ErrorCode::protocol:
      return http::status::bad_request;
    default:
      return http::status::internal_server_error;
  }
}

std::string_view mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

// Queue between the controller's event thread and one WebSocket writer.
struct EventQueue {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> items;
};

}  // namespace

struct HttpServer::Impl {
  struct Connection {
    std::shared_ptr<tcp::socket> socket;
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  Controller& controller;
  std::string host;
  std::uint16_t port;
  std::optional<std::filesystem::path> ui_dir;

  net::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  std::mutex mutex;
  std::list<Connection> connections;

  Impl(Controller& c, std::string h, std::uint16_t p, std::optional<std::filesystem::path> ui)
      : controller(c), host(std::move(h)), port(p), ui_dir(std::move(ui)) {}

  void accept_loop();
  void serve(const std::shared_ptr<tcp::socket>& socket);
  void stream_events(tcp::socket& socket, const Request& req);
  Response handle(const Request& req);
  Response route(const Request& req, const Target& t);
  Response serve_static(const Request& req, const Target& t);
};

void HttpServer::Impl::accept_loop() {
  while (!stopping) {
    auto socket = std::make_shared<tcp::socket>(ioc);
    beast::error_code ec;
    acceptor->accept(*socket, ec);
    if (stopping) break;
    if (ec) continue;
    std::lock_guard lock(mutex);
    for (auto it = connections.begin(); it != connections.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::thread worker([this, socket, done] {
      serve(socket);
      done->store(true);
    });
    connections.push_back({socket, std::move(worker), done});
  }
}

void HttpServer::Impl::serve(const std::shared_ptr<tcp::socket>& socket) {
  beast::flat_buffer buffer;
  for (;;) {
    beast::error_code ec;
    http::request_parser<http::string_body> parser;
    parser.body_limit(kBodyLimit);
    http::read(*socket, buffer, parser, ec);
    if (ec) break;
    auto req = parser.release();
    if (websocket::is_upgrade(req)) {
      if (parse_target(sv(req.target())).segments == std::vector<std::string>{"events"}) stream_events(*socket, req);
      break;
    }
    auto res = handle(req);
    http::write(*socket, res, ec);
    if (ec || !res.keep_alive()) break;
  }
  beast::error_code ignored;
  socket->shutdown(tcp::socket::shutdown_both, ignored);
  socket->close(ignored);
}

void HttpServer::Impl::stream_events(tcp::socket& socket, const Request& req) {
  websocket::stream<tcp::socket&> ws(socket);
  beast::error_code ec;
  ws.accept(req, ec);
  if (ec) return;
  ws.text(true);

  auto queue = std::make_shared<EventQueue>();
  auto push = [queue](const json& event) {
    {
      std::lock_guard lock(queue->mutex);
      queue->items.push_back(event.dump());
    }
    queue->cv.notify_one();
  };
  push({{"type", "hello"}, {"status", controller.status()}});
  int id = controller.subscribe(push);
  while (!stopping) {
    std::string message;
    {
      std::unique_lock lock(queue->mutex);
      queue->cv.wait_for(lock, std::chrono::milliseconds(200), [&] { return !queue->items.empty(); });
      if (queue->items.empty()) {
        lock.unlock();
        // Client frames (a close, or anything else which is ignored).
        if (socket.available(ec) > 0) {
          beast::flat_buffer discard;
          ws.read(discard, ec);
          if (ec) break;
        }
        continue;
      }
      message = std::move(queue->items.front());
      queue->items.pop_front();
    }
    ws.write(net::buffer(message), ec);
    if (ec) break;
  }
  controller.unsubscribe(id);
  if (!ec && ws.is_open()) ws.close(websocket::close_code::going_away, ec);
}

Response HttpServer::Impl::handle(const Request& req) {
  try {
    return route(req, parse_target(sv(req.target())));
  } catch (const Error& e) {
    return error_response(req, status_for(e.code()), got::to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(req, http::status::bad_request, "protocol", e.what());
  } catch (const std::exception& e) {
    return error_response(req, http::status::internal_server_error, "internal", e.what());
  }
}

Response HttpServer::Impl::route(const Request& req, const Target& t) {
  const auto& s = t.segments;
  auto method = req.method();
  auto body = [&] { return req.body().empty() ? json::object() : json::parse(req.body()); };
  auto ok = [&] { return json_response(req, {{"ok", true}}); };
  auto unknown = [&] {
    return error_response(req, http::status::not_found, "not_found",
                          std::string(req.method_string()) + " " + std::string(req.target()) + " is not an endpoint");
  };

  if (method == http::verb::options) return make_response(req, http::status::no_content, "", "text/plain");

  if (s.size() == 1 && method == http::verb::post) {
    if (s[0] == "register") {
      controller.register_node(got::node_registration_from_json(body()));
      return ok();
    }
    if (s[0] == "step") return json_response(req, got::to_json(controller.submit(got::debug_envelope_from_json(body()))));
    if (s[0] == "breakpoints") {
      auto j = body();
      auto text = j.contains("predicate") ? j.at("predicate").get<std::string>() : j.at("text").get<std::string>();
      return json_response(req, {{"id", controller.add_breakpoint(text)}, {"predicate", text}}, http::status::created);
    }
    if (s[0] == "control") {
      auto j = body();
      auto action = j.at("action").get<std::string>();
      if (action == "step_node") {
        controller.step_node(j.at("node").get<std::string>());
      } else if (action == "step_all") {
        controller.step_all();
      } else if (action == "play") {
        controller.play();
      } else if (action == "pause") {
        controller.pause();
      } else {
        throw Error(ErrorCode::invalid_argument, "unknown control action '" + action + "'");
      }
      return json_response(req, controller.status());
    }
  }
  if (s.size() == 1 && method == http::verb::get) {
    if (s[0] == "topology") return json_response(req, controller.topology());
    if (s[0] == "status") return json_response(req, controller.status());
    if (s[0] == "breakpoints") return json_response(req, controller.breakpoints_json());
    if (s[0] == "nodes") return json_response(req, controller.node_names());
  }
  if (s.size() == 2 && s[0] == "breakpoints" && method == http::verb::delete_) {
    controller.remove_breakpoint(s[1]);
    return ok();
  }
  if (s.size() == 3 && s[0] == "nodes") {
    const auto& name = s[1];
    if (method == http::verb::get) {
      if (s[2] == "history") return json_response(req, controller.history(name));
      if (s[2] == "steps") return json_response(req, controller.steps(name));
      if (s[2] == "state") {
        auto it = t.query.find("version");
        std::optional<got::VersionId> version;
        if (it != t.query.end() && !it->second.empty()) version = it->second;
        return json_response(req, controller.state(name, version));
      }
    }
    if (method == http::verb::post && s[2] == "reorder") {
      auto j = body();
      controller.reorder_step(name, j.at("step_id").get<std::string>(),
                              parse_direction(j.at("direction").get<std::string>()));
      return json_response(req, controller.steps(name));
    }
    if (method == http::verb::post && s[2] == "rollback") {
      controller.rollback_node(name, body().at("version").get<std::string>());
      return json_response(req, controller.history(name));
    }
  }
  if (method == http::verb::get) return serve_static(req, t);
  return unknown();
}

Response HttpServer::Impl::serve_static(const Request& req, const Target& t) {
  if (!ui_dir) {
    if (t.segments.empty()) return make_response(req, http::status::ok, kStubPage, "text/html; charset=utf-8");
    return error_response(req, http::status::not_found, "not_found", "no such resource");
  }
  std::filesystem::path rel;
  for (const auto& seg : t.segments) {
    if (seg == ".." || seg == ".") return error_response(req, http::status::bad_request, "protocol", "bad path");
    rel /= seg;
  }
  auto file = *ui_dir / (rel.empty() ? std::filesystem::path("index.html") : rel);
  if (std::filesystem::is_directory(file)) file /= "index.html";
  std::ifstream in(file, std::ios::binary);
  if (!in) return error_response(req, http::status::not_found, "not_found", "no such resource");
  std::ostringstream content;
  content << in.rdbuf();
  return make_response(req, http::status::ok, content.str(), mime_type(file));
}

HttpServer::HttpServer(Controller& controller, std::string host, std::uint16_t port,
                       std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(controller, std::move(host), port, std::move(ui_dir))) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  auto& d = *impl_;
  if (d.acceptor) throw Error(ErrorCode::precondition, "server already started");
  beast::error_code ec;
  auto address = net::ip::make_address(d.host == "localhost" ? "127.0.0.1" : d.host, ec);
  if (ec) throw Error(ErrorCode::invalid_argument, "bad listen host '" + d.host + "'");
  auto acceptor = std::make_unique<tcp::acceptor>(d.ioc);
  tcp::endpoint endpoint{address, d.port};
  acceptor->open(endpoint.protocol(), ec);
  if (!ec) acceptor->set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor->bind(endpoint, ec);
  if (!ec) acceptor->listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorCode::network, "cannot listen on " + d.host + ":" + std::to_string(d.port) + ": " + ec.message());
  d.port = acceptor->local_endpoint().port();
  d.acceptor = std::move(acceptor);
  d.accept_thread = std::thread([&d] { d.accept_loop(); });
}

void HttpServer::stop() {
  auto& d = *impl_;
  if (!d.acceptor || d.stopping.exchange(true)) return;
  {
    // Wake the blocking accept.
    beast::error_code ec;
    tcp::socket poke(d.ioc);
    poke.connect({d.acceptor->local_endpoint().address(), d.port}, ec);
  }
  if (d.accept_thread.joinable()) d.accept_thread.join();
  beast::error_code ignored;
  d.acceptor->close(ignored);

  std::list<Impl::Connection> connections;
  {
    std::lock_guard lock(d.mutex);
    connections.swap(d.connections);
  }
  for (auto& c : connections) ::shutdown(c.socket->native_handle(), SHUT_RDWR);
  for (auto& c : connections) {
    if (c.thread.joinable()) c.thread.join();
  }
}

std::uint16_t HttpServer::port() const { return impl_->port; }

std::string HttpServer::address() const { return impl_->host + ":" + std::to_string(impl_->port); }

}  // namespace gotcha
