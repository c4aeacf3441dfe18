#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "gotcha/controller.hpp"

namespace gotcha {

/// The controller's HTTP/JSON API plus the /events WebSocket and the UI's
/// static files. One thread per connection.
class HttpServer {
 public:
  HttpServer(Controller& controller, std::string host, std::uint16_t port,
             std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts accepting; port 0 picks a free port.
  void start();
  /// Closes every connection. Nodes blocked in POST /step stay blocked until
  /// the controller shuts down.
  void stop();

  std::uint16_t port() const;
  std::string address() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gotcha
