#include "wordcount/launcher.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "got/error.hpp"
#include "gotcha/channel.hpp"

extern char** environ;

namespace wordcount {

using got::Error;
using got::ErrorCode;

std::string worker_name(int index) { return "WordCounter" + std::to_string(index + 1); }

std::vector<std::string> Cluster::node_names() const {
  std::vector<std::string> names{kGrouperName};
  for (int i = 0; i < config().num_workers; ++i) names.push_back(worker_name(i));
  return names;
}

namespace {

got::NodeConfig base_config(NodeSettings& s) {
  got::NodeConfig cfg;
  cfg.name = s.name;
  cfg.registry = schemas();
  cfg.server_port = s.port;
  cfg.remote = s.remote;
  cfg.resolver = resolver_named(s.resolver);
  cfg.network = s.network;
  cfg.debug = s.debug;
  return cfg;
}

}  // namespace

got::NodeConfig grouper_node(NodeSettings settings, std::vector<std::string> lines, int num_workers,
                             std::ostream& out) {
  auto cfg = base_config(settings);
  if (!cfg.server_port) cfg.server_port = 0;
  auto app = settings.app;
  cfg.app = [lines = std::move(lines), num_workers, &out, app](got::Dataframe& df, const std::vector<std::string>&) {
    grouper_app(df, lines, num_workers, out, app);
  };
  return cfg;
}

got::NodeConfig worker_node(NodeSettings settings, int index, int num_workers) {
  auto cfg = base_config(settings);
  if (!cfg.remote) throw Error(ErrorCode::invalid_argument, "worker " + settings.name + " needs a remote");
  auto app = settings.app;
  cfg.app = [index, num_workers, app](got::Dataframe& df, const std::vector<std::string>&) {
    worker_app(df, index, num_workers, app);
  };
  return cfg;
}

// ---- threads ----

namespace {

class ThreadCluster : public Cluster {
 public:
  ThreadCluster(ClusterConfig config, std::shared_ptr<got::InProcessNetwork> network, gotcha::Controller* controller)
      : config_(std::move(config)), network_(std::move(network)), controller_(controller) {}

  ~ThreadCluster() override {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  void start() override {
    std::shared_ptr<got::DebugChannel> debug;
    AppOptions app;
    if (controller_ != nullptr) {
      debug = std::make_shared<gotcha::ControllerChannel>(*controller_);
      app.poll_interval = std::chrono::milliseconds(0);
    }
    NodeSettings g{kGrouperName, 0, std::nullopt, config_.resolver, network_, debug, app};
    nodes_.push_back(std::make_unique<got::Node>(grouper_node(g, config_.lines, config_.num_workers, output_)));
    auto remote = nodes_.front()->address();
    for (int i = 0; i < config_.num_workers; ++i) {
      NodeSettings w{worker_name(i), std::nullopt, remote, config_.resolver, network_, debug, app};
      nodes_.push_back(std::make_unique<got::Node>(worker_node(w, i, config_.num_workers)));
    }
    failures_.resize(nodes_.size());
    done_ = std::make_unique<std::atomic<bool>[]>(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      threads_.emplace_back([this, i] {
        try {
          nodes_[i]->run();
        } catch (...) {
          failures_[i] = std::current_exception();
        }
        done_[i].store(true);
      });
    }
  }

  void wait(std::chrono::milliseconds timeout) override {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      while (!done_[i].load()) {
        if (std::chrono::steady_clock::now() > deadline) {
          throw Error(ErrorCode::precondition, "node " + nodes_[i]->name() + " did not finish in time");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
      threads_[i].join();
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (failures_[i]) std::rethrow_exception(failures_[i]);
    }
  }

  std::string output() const override { return output_.str(); }
  const ClusterConfig& config() const override { return config_; }

 private:
  ClusterConfig config_;
  std::shared_ptr<got::InProcessNetwork> network_;
  gotcha::Controller* controller_;
  std::ostringstream output_;
  std::vector<std::unique_ptr<got::Node>> nodes_;
  std::vector<std::thread> threads_;
  std::vector<std::exception_ptr> failures_;
  std::unique_ptr<std::atomic<bool>[]> done_;
};

}  // namespace

std::unique_ptr<Cluster> make_thread_cluster(ClusterConfig config, std::shared_ptr<got::InProcessNetwork> network,
                                             gotcha::Controller* controller) {
  return std::make_unique<ThreadCluster>(std::move(config), std::move(network), controller);
}

// ---- processes ----

std::uint16_t free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorCode::network, "socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof(addr);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(fd);
    throw Error(ErrorCode::network, "cannot find a free port");
  }
  ::close(fd);
  return ntohs(addr.sin_port);
}

namespace {

bool port_open(std::uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return false;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  bool ok = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0;
  ::close(fd);
  return ok;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class ProcessCluster : public Cluster {
 public:
  ProcessCluster(ClusterConfig config, ProcessOptions options)
      : config_(std::move(config)), options_(std::move(options)) {
    std::random_device rd;
    dir_ = options_.work_dir / ("wordcount-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(dir_);
  }

  ~ProcessCluster() override {
    for (auto& c : children_) {
      if (!c.finished) {
        ::kill(c.pid, SIGKILL);
        ::waitpid(c.pid, nullptr, 0);
      }
    }
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }

  void start() override {
    auto input = dir_ / "input.txt";
    {
      std::ofstream f(input);
      for (const auto& l : config_.lines) f << l << "\n";
    }
    auto port = free_port();
    spawn(kGrouperName, {"grouper", input.string(), std::to_string(config_.num_workers), "--port",
                         std::to_string(port), "--name", kGrouperName, "--resolver", config_.resolver});
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (!port_open(port)) {
      if (std::chrono::steady_clock::now() > deadline || reap(children_.front())) {
        throw Error(ErrorCode::network, "Grouper did not start listening: " + slurp(children_.front().err));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    auto remote = "127.0.0.1:" + std::to_string(port);
    for (int i = 0; i < config_.num_workers; ++i) {
      spawn(worker_name(i), {"worker", remote, std::to_string(i), std::to_string(config_.num_workers), "--name",
                             worker_name(i), "--resolver", config_.resolver});
    }
  }

  void wait(std::chrono::milliseconds timeout) override {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (auto& c : children_) {
      while (!reap(c)) {
        if (std::chrono::steady_clock::now() > deadline) {
          throw Error(ErrorCode::precondition, "process " + c.name + " did not finish in time");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
    }
    for (auto& c : children_) {
      if (!WIFEXITED(c.status) || WEXITSTATUS(c.status) != 0) {
        throw Error(ErrorCode::precondition, "process " + c.name + " failed: " + slurp(c.err));
      }
    }
  }

  std::string output() const override { return slurp(dir_ / "Grouper.out"); }
  const ClusterConfig& config() const override { return config_; }

 private:
  struct Child {
    std::string name;
    pid_t pid = 0;
    std::filesystem::path err;
    bool finished = false;
    int status = 0;
  };

  bool reap(Child& c) {
    if (c.finished) return true;
    int status = 0;
    if (::waitpid(c.pid, &status, WNOHANG) == c.pid) {
      c.finished = true;
      c.status = status;
    }
    return c.finished;
  }

  void spawn(const std::string& name, std::vector<std::string> args) {
    args.insert(args.begin(), options_.executable.string());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    std::vector<std::string> env_store;
    for (char** e = environ; *e != nullptr; ++e) {
      if (std::string_view(*e).rfind("GOTCHA_GCN=", 0) != 0) env_store.emplace_back(*e);
    }
    if (!options_.controller_address.empty()) env_store.push_back("GOTCHA_GCN=" + options_.controller_address);
    std::vector<char*> envp;
    for (auto& e : env_store) envp.push_back(e.data());
    envp.push_back(nullptr);

    Child c{name, 0, dir_ / (name + ".err")};
    auto out = (dir_ / (name + ".out")).string();
    auto err = c.err.string();
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int rc = ::posix_spawn(&c.pid, argv[0], &actions, nullptr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw Error(ErrorCode::precondition, "cannot start " + args[0] + ": " + std::strerror(rc));
    children_.push_back(std::move(c));
  }

  ClusterConfig config_;
  ProcessOptions options_;
  std::filesystem::path dir_;
  std::vector<Child> children_;
};

}  // namespace

std::unique_ptr<Cluster> make_process_cluster(ClusterConfig config, ProcessOptions options) {
  return std::make_unique<ProcessCluster>(std::move(config), std::move(options));
}

}  // namespace wordcount
