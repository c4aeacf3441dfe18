#include <doctest.h>

#include <memory>

#include "got/dataframe.hpp"
#include "got/error.hpp"
#include "support.hpp"

using namespace got;

namespace {

SchemaRegistry types() {
  SchemaRegistry r;
  r.register_schema("Line", "line_num", {{"line_num", ValueKind::integer}, {"line", ValueKind::string}});
  r.register_schema("WordCount", "word", {{"word", ValueKind::string}, {"count", ValueKind::integer}});
  r.register_schema("Stop", "index", {{"index", ValueKind::integer}, {"accepted", ValueKind::boolean}});
  return r;
}

ObjectState line(std::int64_t n, const std::string& text) {
  return ObjectState{"Line", n, {{"line_num", n}, {"line", text}}};
}

ObjectState wc(const std::string& w, std::int64_t c) { return ObjectState{"WordCount", w, {{"word", w}, {"count", c}}}; }

// A dataframe serving on an in-process network plus helpers to build peers.
struct Net {
  std::shared_ptr<InProcessNetwork> network = std::make_shared<InProcessNetwork>();

  std::unique_ptr<Dataframe> node(const std::string& name, std::optional<std::string> remote = std::nullopt,
                                  Resolver resolver = {}) {
    DataframeOptions o;
    o.node_name = name;
    o.remote = std::move(remote);
    o.resolver = std::move(resolver);
    o.network = network;
    return std::make_unique<Dataframe>(types(), o);
  }

  std::string serve(Dataframe& df) {
    return network->listen(df.node_name(), 0,
                           [&df](const SyncMessage& m, const std::string& origin) { return df.serve(m, origin); });
  }
};

void check_staging(Dataframe& df) {
  CHECK(apply_diff(df.graph().state_at(df.snapshot_version()), df.staged()) == df.snapshot_state());
  CHECK(df.graph().ref(kSnapshotRef) == df.snapshot_version());
}

}  // namespace

TEST_CASE("reads come from the snapshot") {
  Net net;
  auto df = net.node("A");
  CHECK(df->read_all("WordCount").empty());
  for (auto w : {"foo", "bar", "baz"}) df->add_one(wc(w, 1));
  std::vector<std::string> order;
  for (auto& h : df->read_all("WordCount")) order.push_back(h.get_string("word"));
  CHECK(order == std::vector<std::string>{"bar", "baz", "foo"});
  CHECK_FALSE(df->read_one("WordCount", std::string("nope")));
  CHECK(df->read_one("WordCount", std::string("foo"))->get_int("count") == 1);
  CHECK_THROWS_AS(df->read_all("Nope"), Error);
  CHECK_THROWS_AS(df->add_one(wc("foo", 2)), Error);
  CHECK_THROWS_AS(df->delete_one("WordCount", std::string("nope")), Error);
  CHECK_THROWS_AS(df->add_one(ObjectState{"WordCount", std::string("x"), {{"word", std::string("x")}}}), Error);
  // Nothing is published before commit.
  CHECK(df->head() == kRootVersion);
  check_staging(*df);
}

TEST_CASE("handles") {
  Net net;
  auto df = net.node("A");
  df->add_one(wc("bar", 2));
  auto h = *df->read_one("WordCount", std::string("bar"));
  h.set("count", std::int64_t{3});
  CHECK(df->read_one("WordCount", std::string("bar"))->get_int("count") == 3);
  CHECK_THROWS_AS(h.set("count", std::string("three")), Error);
  CHECK_THROWS_AS(h.set("word", std::string("other")), Error);
  CHECK_THROWS_AS(h.set("nope", std::int64_t{1}), Error);
  df->commit();
  df->checkout();
  CHECK_THROWS_AS(h.get_int("count"), Error);
  CHECK_THROWS_AS(h.set("count", std::int64_t{4}), Error);

  df->read_one("WordCount", std::string("bar"))->set("count", std::int64_t{3});
  CHECK(df->staged().empty());
  df->read_one("WordCount", std::string("bar"))->set("count", std::int64_t{5});
  CHECK(df->staged().size() == 1);
  check_staging(*df);
}

TEST_CASE("staging and commit") {
  Net net;
  auto df = net.node("A");
  SUBCASE("add then delete cancels") {
    df->add_one(line(0, "foo"));
    df->delete_one("Line", std::int64_t{0});
    CHECK(df->staged().empty());
    df->commit();
    CHECK(df->head() == kRootVersion);
  }
  SUBCASE("six commits make a linear history") {
    for (int i = 0; i < 6; ++i) {
      df->add_one(line(i, "x"));
      df->commit();
      check_staging(*df);
    }
    auto g = df->graph();
    CHECK(g.state_at(g.head()).size() == 6);
    CHECK(g.vertex_count() == 2);  // older versions are collected
    CHECK(df->snapshot_version() == g.head());
    auto head = df->head();
    df->commit();
    CHECK(df->head() == head);
  }
  SUBCASE("deletes reach the history") {
    df->add_many({line(0, "a"), line(1, "b")});
    df->commit();
    auto before = df->head();
    df->delete_all("Line");
    CHECK(df->read_all("Line").empty());
    df->commit();
    auto g = df->graph();
    CHECK(g.state_at(g.head()).empty());
    const Diff* edge = g.edge(before, g.head());
    if (edge != nullptr) CHECK(edge->find({"Line", std::int64_t{0}})->kind == DeltaKind::deleted);
  }
  SUBCASE("checkout refuses staged changes") {
    df->add_one(line(0, "a"));
    CHECK_THROWS_AS(df->checkout(), Error);
  }
  SUBCASE("commit then checkout keeps the snapshot") {
    df->add_many({line(0, "a"), wc("a", 1)});
    df->commit();
    auto s = df->snapshot_state();
    df->checkout();
    CHECK(df->snapshot_state() == s);
  }
}

TEST_CASE("random API sequences keep the snapshot invariant") {
  testing::Gen g(99);
  Net net;
  for (int round = 0; round < 30; ++round) {
    auto df = net.node("A" + std::to_string(round));
    for (int op = 0; op < 60; ++op) {
      auto word = std::string(1, static_cast<char>('a' + g.below(4)));
      switch (g.below(5)) {
        case 0:
          if (!df->read_one("WordCount", word)) df->add_one(wc(word, g.below(5)));
          break;
        case 1:
          if (df->read_one("WordCount", word)) df->delete_one("WordCount", word);
          break;
        case 2:
          if (auto h = df->read_one("WordCount", word)) h->set("count", std::int64_t{g.below(5)});
          break;
        case 3:
          df->commit();
          CHECK(df->staged().empty());
          break;
        case 4:
          if (df->staged().empty()) df->checkout();
          break;
      }
      check_staging(*df);
    }
  }
}

TEST_CASE("fetch and push") {
  Net net;
  auto server = net.node("S");
  auto addr = net.serve(*server);
  auto client = net.node("C", addr);

  server->add_one(line(0, "foo"));
  server->commit();
  server->add_one(line(1, "bar"));
  server->commit();

  SUBCASE("fetch leaves reads alone until checkout") {
    client->fetch();
    CHECK(client->head() == server->head());
    CHECK(client->head_state() == server->head_state());
    CHECK(client->read_all("Line").empty());
    client->checkout();
    CHECK(client->read_all("Line").size() == 2);
  }
  SUBCASE("pull") {
    client->pull();
    CHECK(client->snapshot_state() == server->head_state());
  }
  SUBCASE("push publishes committed changes only") {
    client->pull();
    client->add_one(wc("foo", 1));
    client->push();
    CHECK(server->head_state().find({"WordCount", std::string("foo")}) == nullptr);
    client->commit();
    client->push();
    CHECK(server->head_state().find({"WordCount", std::string("foo")}) != nullptr);
    CHECK(server->head() == client->head());
    // The server's application still reads its own snapshot.
    CHECK(server->read_all("WordCount").empty());
    auto head = server->head();
    client->push();
    CHECK(server->head() == head);
  }
  SUBCASE("commit onto an advanced head merges") {
    client->pull();
    client->add_one(wc("foo", 1));
    client->commit();
    client->push();
    server->add_one(line(2, "baz"));
    server->commit();
    auto g = server->graph();
    CHECK(g.parents(g.head()).size() == 2);
    CHECK(server->snapshot_state() == server->head_state());
    CHECK(server->read_one("WordCount", std::string("foo")));
    check_staging(*server);
  }
}

TEST_CASE("serving raw messages") {
  Net net;
  auto server = net.node("S");
  server->add_one(line(0, "a"));
  server->commit();
  server->add_one(line(1, "b"));
  server->commit();

  auto reply = server->serve(FetchRequest{"peer", kRootVersion});
  auto* resp = std::get_if<FetchResponse>(&reply);
  REQUIRE(resp);
  CHECK(resp->new_head == server->head());
  CHECK(apply_diff(State{}, resp->diff) == server->head_state());

  // An id the server never saw falls back to the full state.
  reply = server->serve(FetchRequest{"peer2", "deadbeef"});
  resp = std::get_if<FetchResponse>(&reply);
  REQUIRE(resp);
  CHECK(resp->start_version == kRootVersion);
  CHECK(apply_diff(State{}, resp->diff) == server->head_state());

  reply = server->serve(PushRequest{"peer", "deadbeef", "cafe", Diff{}});
  REQUIRE(std::holds_alternative<ErrorReply>(reply));
  CHECK(std::get<ErrorReply>(reply).code == "unknown_version");

  reply = server->serve(PushRequest{"peer", server->head(), "cafe", Diff{{{"Line", std::int64_t{2}},
                                                                          ObjectDelta::added(line(2, "c").dims)}}});
  REQUIRE(std::holds_alternative<PushAck>(reply));
  CHECK(std::get<PushAck>(reply).accepted_head == "cafe");
  CHECK(server->graph().ref("peer") == "cafe");

  reply = server->serve(PushAck{"x"});
  REQUIRE(std::holds_alternative<ErrorReply>(reply));
}

TEST_CASE("a peer that lost its history is resent everything") {
  Net net;
  auto server = net.node("S");
  auto addr = net.serve(*server);
  auto a = net.node("A", addr);
  a->add_one(wc("foo", 1));
  a->commit();
  a->push();
  // The server forgets A's version.
  server->serve(RollbackRequest{kRootVersion});
  CHECK(server->head() == kRootVersion);
  a->add_one(wc("bar", 1));
  a->commit();
  a->push();
  CHECK(server->head_state() == a->head_state());
}

TEST_CASE("rollback keeps what the application sees") {
  Net net;
  auto df = net.node("A");
  df->add_one(line(0, "a"));
  df->commit();
  df->add_one(line(1, "b"));
  df->commit();
  auto seen = df->snapshot_state();
  // Intermediate versions are collected, so ROOT is the only older one left.
  CHECK_THROWS_AS(df->serve(RollbackRequest{"nope"}), Error);
  auto reply = df->serve(RollbackRequest{kRootVersion});
  REQUIRE(std::holds_alternative<RollbackAck>(reply));
  CHECK(df->head() == kRootVersion);
  CHECK(df->snapshot_version() == kRootVersion);
  CHECK(df->snapshot_state() == seen);
  CHECK(df->staged().size() == 2);
  check_staging(*df);
  df->commit();
  CHECK(df->head_state() == seen);
}

TEST_CASE("sending without a remote or to nobody") {
  Net net;
  auto lonely = net.node("L");
  CHECK_THROWS_AS(lonely->push(), Error);
  CHECK_THROWS_AS(lonely->fetch(), Error);
  auto lost = net.node("X", std::string("inproc://nobody"));
  CHECK_THROWS_AS(lost->fetch(), Error);
}
