#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "got/error.hpp"
#include "got/http_transport.hpp"
#include "got/node.hpp"
#include "wordcount/launcher.hpp"

struct NodeArgs {
  std::string app;
  std::string name;
  std::optional<std::uint16_t> port;
  std::optional<std::string> remote;
  std::string debug;
  std::string resolver = "default";
  std::vector<std::string> args;
};

inline int parse_count(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    int n = std::stoi(text, &used);
    if (used == text.size()) return n;
  } catch (const std::exception&) {
  }
  throw got::Error(got::ErrorCode::invalid_argument, std::string(what) + " must be an integer, got '" + text + "'");
}

// Builds and runs a grouper or worker node until its application returns.
inline void run_node(NodeArgs a) {
  if (a.debug.empty()) {
    if (const char* env = std::getenv("GOTCHA_GCN"); env != nullptr && *env != '\0') a.debug = env;
  }
  wordcount::NodeSettings s;
  s.name = a.name;
  s.port = a.port;
  s.remote = a.remote;
  s.resolver = a.resolver;
  s.network = std::make_shared<got::HttpNetwork>();
  if (!a.debug.empty()) {
    s.debug = std::make_shared<got::HttpDebugChannel>(a.debug);
    s.app.poll_interval = std::chrono::milliseconds(0);
  }
  got::NodeConfig cfg;
  if (a.app == "grouper") {
    if (a.args.size() != 2) throw got::Error(got::ErrorCode::invalid_argument, "grouper needs <file> <num_workers>");
    if (s.name.empty()) s.name = wordcount::kGrouperName;
    cfg = wordcount::grouper_node(s, wordcount::read_lines(a.args[0]), parse_count(a.args[1], "num_workers"),
                                  std::cout);
  } else if (a.app == "worker") {
    if (a.args.size() != 2) throw got::Error(got::ErrorCode::invalid_argument, "worker needs <index> <num_workers>");
    int index = parse_count(a.args[0], "index");
    if (s.name.empty()) s.name = wordcount::worker_name(index);
    cfg = wordcount::worker_node(s, index, parse_count(a.args[1], "num_workers"));
  } else {
    throw got::Error(got::ErrorCode::invalid_argument, "unknown app '" + a.app + "' (grouper or worker)");
  }
  got::Node node(std::move(cfg));
  node.run();
}
