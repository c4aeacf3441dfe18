#include <fstream>

#include <CLI11.hpp>

#include "gotcha/http_server.hpp"
#include "node_cli.hpp"
#include "wordcount/scenario.hpp"

namespace {

wordcount::Schedule parse_schedule(const std::string& s) {
  if (s == "scripted") return wordcount::Schedule::scripted;
  if (s == "random") return wordcount::Schedule::random;
  if (s == "free-run") return wordcount::Schedule::free_run;
  throw got::Error(got::ErrorCode::invalid_argument, "unknown schedule '" + s + "'");
}

struct ScenarioArgs {
  std::string resolver;
  std::optional<std::uint64_t> seed;
  std::string schedule;
  std::string input;
  std::string breakpoint;
  std::string transcript;
  std::string listen = "127.0.0.1:0";
};

int run_scenario(const ScenarioArgs& a) {
  wordcount::ClusterConfig cfg;
  cfg.resolver = a.resolver;
  if (!a.input.empty()) cfg.lines = wordcount::read_lines(a.input);

  wordcount::ScenarioOptions opt;
  opt.schedule = a.schedule.empty() ? (a.seed ? wordcount::Schedule::random : wordcount::Schedule::scripted)
                                    : parse_schedule(a.schedule);
  opt.seed = a.seed.value_or(0);
  if (!a.breakpoint.empty()) {
    opt.breakpoint = a.breakpoint;
    opt.on_hit = [](gotcha::Controller& c, const gotcha::BreakpointHit& hit) {
      std::cerr << "breakpoint " << hit.breakpoint_id << " hit at " << hit.node << " step " << hit.step_id
                << " before " << hit.phase << "\n"
                << c.steps(hit.node).dump(2) << "\n";
    };
  }

  auto [host, port] = got::split_host_port(a.listen);
  auto network = std::make_shared<got::HttpNetwork>();
  gotcha::Controller controller(network);
  gotcha::HttpServer server(controller, host, port);
  server.start();
  std::cerr << "controller listening on " << server.address() << "\n";

  wordcount::ProcessOptions popt;
  popt.executable = std::filesystem::read_symlink("/proc/self/exe");
  popt.controller_address = server.address();
  auto cluster = wordcount::make_process_cluster(cfg, popt);
  wordcount::ScenarioResult result;
  try {
    result = wordcount::run_scenario(controller, *cluster, opt);
  } catch (...) {
    controller.shutdown();
    server.stop();
    throw;
  }
  controller.shutdown();
  server.stop();
  if (!a.transcript.empty()) std::ofstream(a.transcript) << result.transcript.dump(1) << "\n";
  std::cout << result.output << std::flush;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Distributed word count"};
  cli.require_subcommand(1);

  NodeArgs g;
  g.app = "grouper";
  std::uint16_t gport = 0;
  std::string file, workers;
  auto* grouper = cli.add_subcommand("grouper", "publish <file> and print the counts");
  grouper->add_option("file", file)->required();
  grouper->add_option("num_workers", workers)->required();
  grouper->add_option("--port", gport, "sync port (0 picks one)");
  grouper->add_option("--name", g.name);
  grouper->add_option("--resolver", g.resolver, "default, buggy or fixed");

  NodeArgs w;
  w.app = "worker";
  std::string remote, index, wworkers;
  auto* worker = cli.add_subcommand("worker", "count every num_workers-th line");
  worker->add_option("grouper", remote, "host:port")->required();
  worker->add_option("index", index)->required();
  worker->add_option("num_workers", wworkers)->required();
  worker->add_option("--name", w.name);
  worker->add_option("--resolver", w.resolver, "default, buggy or fixed");

  ScenarioArgs s;
  std::uint64_t seed = 0;
  auto* scenario = cli.add_subcommand("scenario", "run a Grouper and two workers under the debugger");
  scenario->add_option("merge", s.resolver, "buggy or fixed")->required()->check(CLI::IsMember({"buggy", "fixed"}));
  auto* seed_opt = scenario->add_option("--seed", seed, "random grant order with this seed");
  scenario->add_option("--schedule", s.schedule, "scripted, random or free-run");
  scenario->add_option("--input", s.input, "lines to count (default: the six-line sample)");
  scenario->add_option("--breakpoint", s.breakpoint, "predicate to stop at");
  scenario->add_option("--transcript", s.transcript, "write the grant transcript here");
  scenario->add_option("--listen", s.listen, "controller address");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (grouper->parsed()) {
      g.port = gport;
      g.args = {file, workers};
      run_node(std::move(g));
    } else if (worker->parsed()) {
      w.remote = remote;
      w.args = {index, wworkers};
      run_node(std::move(w));
    } else {
      if (seed_opt->count() > 0) s.seed = seed;
      return run_scenario(s);
    }
  } catch (const std::exception& e) {
    std::cerr << "got-wordcount: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
