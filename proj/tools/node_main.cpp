#include <CLI11.hpp>

#include "node_cli.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Run one word count node"};
  NodeArgs a;
  std::uint16_t port = 0;
  std::string remote;
  cli.add_option("--app", a.app, "grouper or worker")->required();
  cli.add_option("--name", a.name, "node id");
  auto* port_opt = cli.add_option("--port", port, "serve sync requests on this port");
  cli.add_option("--remote", remote, "host:port of the node to pull from and push to");
  cli.add_option("--debug", a.debug, "controller host:port (default: $GOTCHA_GCN)");
  cli.add_option("--resolver", a.resolver, "default, buggy or fixed");
  cli.add_option("args", a.args, "application arguments");
  CLI11_PARSE(cli, argc, argv);
  if (port_opt->count() > 0) a.port = port;
  if (!remote.empty()) a.remote = remote;
  try {
    run_node(std::move(a));
  } catch (const std::exception& e) {
    std::cerr << "got-node: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
