#include <doctest.h>
#include <httplib.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <memory>
#include <thread>

#include "got/http_transport.hpp"
#include "got/node.hpp"
#include "gotcha/controller.hpp"
#include "gotcha/http_server.hpp"
#include "rig.hpp"
#include "wordcount/wordcount.hpp"

using nlohmann::json;

namespace {

struct Server {
  std::shared_ptr<got::HttpNetwork> net = std::make_shared<got::HttpNetwork>();
  gotcha::Controller ctrl{net};
  gotcha::HttpServer http{ctrl, "127.0.0.1", 0};
  std::unique_ptr<httplib::Client> client;
  std::vector<std::unique_ptr<got::Node>> nodes;

  Server() {
    ctrl.set_settle_timeout(std::chrono::seconds(10));
    http.start();
    client = std::make_unique<httplib::Client>("127.0.0.1", http.port());
    client->set_read_timeout(30);
  }

  ~Server() {
    ctrl.shutdown();
    for (auto& n : nodes) {
      try {
        n->join();
      } catch (...) {
      }
    }
    http.stop();
  }

  std::pair<int, json> get(const std::string& path) {
    auto r = client->Get(path);
    REQUIRE(r);
    return {r->status, r->get_header_value("Content-Type").find("json") != std::string::npos ? json::parse(r->body)
                                                                                             : json(r->body)};
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client->Post(path, body.dump(), "application/json");
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
  }

  got::Node& add(const std::string& name, got::AppFunction app, std::optional<std::string> remote = std::nullopt) {
    got::NodeConfig cfg;
    cfg.name = name;
    cfg.app = std::move(app);
    cfg.registry = wordcount::schemas();
    cfg.server_port = 0;
    cfg.remote = std::move(remote);
    cfg.network = net;
    cfg.debug = std::make_shared<got::HttpDebugChannel>(http.address());
    nodes.push_back(std::make_unique<got::Node>(std::move(cfg)));
    nodes.back()->start_async();
    while (!ctrl.has_node(name)) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    REQUIRE(ctrl.wait_settled(std::chrono::seconds(10)));
    return *nodes.back();
  }
};

got::ObjectState wc(const std::string& w, std::int64_t c) {
  return got::ObjectState{wordcount::kWordCount, w, {{"word", w}, {"count", c}}};
}

}  // namespace

TEST_CASE("routes and error mapping") {
  Server s;
  auto [code, page] = s.get("/");
  CHECK(code == 200);
  CHECK(page.get<std::string>().find("<html") != std::string::npos);

  CHECK(s.get("/nope").first == 404);
  CHECK(s.get("/nodes/Nobody/history").first == 404);
  CHECK(s.post("/nodes/Nobody/rollback", {{"version", "ROOT"}}).first == 404);
  CHECK(s.post("/nope", json::object()).first == 404);
  CHECK(s.post("/control", {{"action", "dance"}}).first == 400);
  CHECK(s.post("/control", {{"node", "x"}}).first == 400);
  auto bad = s.client->Post("/breakpoints", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).contains("error"));

  auto [status_code, status] = s.get("/status");
  CHECK(status_code == 200);
  CHECK(status["mode"] == "paused");
  CHECK(status["nodes"].empty());

  auto [created, bp] = s.post("/breakpoints", {{"predicate", "exists(WordCount, count == 6)"}});
  CHECK(created == 201);
  CHECK(bp["predicate"] == "exists(WordCount, count == 6)");
  CHECK(s.post("/breakpoints", {{"predicate", "exists(WordCount, count = 6)"}}).first == 400);
  CHECK(s.get("/breakpoints").second.size() == 1);
  auto id = bp["id"].get<std::string>();
  CHECK(s.client->Delete("/breakpoints/" + id)->status == 200);
  CHECK(s.client->Delete("/breakpoints/" + id)->status == 404);
  CHECK(s.get("/breakpoints").second.empty());

  CHECK(s.post("/control", {{"action", "play"}}).second["mode"] == "free-run");
  // Stepping needs a paused system.
  CHECK(s.post("/control", {{"action", "step_all"}}).first == 409);
  CHECK(s.post("/control", {{"action", "pause"}}).second["mode"] == "paused");
}

TEST_CASE("events over the websocket") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  Server s;
  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(s.http.port())));
  ws.handshake("127.0.0.1", "/events");

  auto next = [&] {
    beast::flat_buffer buffer;
    ws.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  };
  auto hello = next();
  CHECK(hello["type"] == "hello");
  CHECK(hello["status"]["mode"] == "paused");

  s.post("/breakpoints", {{"predicate", "exists(Line)"}});
  CHECK(next()["type"] == "breakpoints-changed");

  s.add("A", [](got::Dataframe& df, const std::vector<std::string>&) {
    df.add_one(wc("x", 1));
    df.commit();
  });
  std::vector<std::string> seen;
  while (std::find(seen.begin(), seen.end(), "step-queued") == seen.end()) seen.push_back(next()["type"]);
  CHECK(std::find(seen.begin(), seen.end(), "node-registered") != seen.end());

  s.post("/control", {{"action", "step_node"}, {"node", "A"}});
  json e;
  do {
    e = next();
  } while (e["type"] != "phase-executed");
  CHECK(e["node"] == "A");
  CHECK(e["phase"] == "receive-data");
  ws.close(websocket::close_code::normal);
}

TEST_CASE("debugging nodes that talk HTTP") {
  Server s;
  testing::Idle idle;
  auto& g = s.add("Grouper", idle.app());
  auto& w = s.add(
      "W",
      [](got::Dataframe& df, const std::vector<std::string>&) {
        df.add_one(wc("foo", 1));
        df.commit();
        df.push();
      },
      g.address());

  auto nodes = s.get("/nodes").second;
  CHECK(nodes == json::array({"Grouper", "W"}));
  auto topo = s.get("/topology").second;
  REQUIRE(topo["edges"].size() == 1);
  CHECK(topo["edges"][0] == json{{"from", "W"}, {"to", "Grouper"}});

  auto steps = s.get("/nodes/W/steps").second;
  REQUIRE(steps["pending"].size() == 1);
  CHECK(steps["pending"][0]["kind"] == "commit");
  CHECK(steps["pending"][0]["ready"] == true);

  auto pushed = [&] {
    auto executed = s.get("/nodes/W/steps").second["executed"];
    for (const auto& st : executed) {
      if (st["kind"] == "push") return true;
    }
    return false;
  };
  for (int i = 0; i < 50 && !pushed(); ++i) {
    auto p = s.get("/nodes/W/steps").second["pending"];
    bool w_ready = !p.empty() && p[0]["ready"] == true;
    auto [code, body] = s.post("/control", {{"action", "step_node"}, {"node", w_ready ? "W" : "Grouper"}});
    REQUIRE(code == 200);
  }
  REQUIRE(pushed());

  auto state = s.get("/nodes/Grouper/state").second;
  CHECK(state["state"].size() == 1);
  auto head = s.get("/nodes/Grouper/history").second["head"];
  CHECK(head != "ROOT");
  CHECK(s.get("/nodes/Grouper/state?version=ROOT").second["state"].empty());
  CHECK(s.get("/nodes/Grouper/state?version=nope").first == 404);

  CHECK(s.post("/nodes/Grouper/reorder", {{"step_id", "nope"}, {"direction", "up"}}).first == 404);
  CHECK(s.post("/nodes/Grouper/reorder", {{"step_id", "nope"}, {"direction", "sideways"}}).first == 400);
  CHECK(s.post("/nodes/Grouper/rollback", {{"version", "nope"}}).first == 404);
  auto [rolled, history] = s.post("/nodes/Grouper/rollback", {{"version", "ROOT"}});
  CHECK(rolled == 200);
  CHECK(history["head"] == "ROOT");
  CHECK(g.dataframe().head_state().empty());

  s.post("/control", {{"action", "play"}});
  w.join();
  idle.stop->store(true);
  g.join();
  CHECK(s.get("/topology").second["nodes"][1]["exited"] == true);
}
