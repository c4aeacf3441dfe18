#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "got/http_transport.hpp"
#include "gotcha/http_server.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Debugger controller"};
  std::string listen = "127.0.0.1:7700";
  std::string ui_dir;
  cli.add_option("--listen", listen, "host:port to serve the API on");
  cli.add_option("--ui-dir", ui_dir, "serve the built UI from here");
  CLI11_PARSE(cli, argc, argv);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    auto [host, port] = got::split_host_port(listen);
    gotcha::Controller controller(std::make_shared<got::HttpNetwork>());
    std::optional<std::filesystem::path> ui;
    if (!ui_dir.empty()) ui = ui_dir;
    gotcha::HttpServer server(controller, host, port, ui);
    server.start();
    std::cout << "gotcha listening on " << server.address() << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    controller.shutdown();
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "gotcha: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
