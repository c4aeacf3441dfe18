#include <doctest.h>

#include <deque>
#include <map>

#include "got/error.hpp"
#include "oracles.hpp"

using namespace got;
using namespace testing;

namespace {

State lines(int n) {
  State s;
  for (int i = 0; i < n; ++i) {
    s.put(ObjectState{"Line", std::int64_t{i}, {{"line_num", std::int64_t{i}}, {"line", std::string("x")}}});
  }
  return s;
}

Diff add_line(std::int64_t i, const std::string& text) {
  return Diff{{{"Line", i}, ObjectDelta::added({{"line_num", i}, {"line", text}})}};
}

ObjectState count(const std::string& word, std::int64_t c) {
  return ObjectState{"WordCount", word, {{"word", word}, {"count", c}}};
}

Diff set_count(const std::string& word, std::int64_t c) {
  return Diff{{{"WordCount", word}, ObjectDelta::modified({{"count", c}})}};
}

std::int64_t count_of(const State& s, const std::string& word) {
  return std::get<std::int64_t>(s.find({"WordCount", word})->at("count"));
}

// Merge functions written against the triple contract, independent of the app.
State add_counts(const MergeInput& in, bool subtract_orig) {
  auto merged = in.update_not_conflicting();
  for (const auto& c : in.conflicts) {
    auto n = std::get<std::int64_t>(c.yours->at("count")) + std::get<std::int64_t>(c.theirs->at("count"));
    if (subtract_orig && c.orig) n -= std::get<std::int64_t>(c.orig->at("count"));
    auto o = *c.yours;
    o.dims["count"] = n;
    merged.put(o);
  }
  return merged;
}

// Graph with bar=2 at head "base", and a peer's bar=3 pending.
VersionGraph forked(const Resolver& resolver, MergeReport& report) {
  VersionGraph g(nullptr, counter());
  State s;
  s.put(count("bar", 2));
  auto base = g.extend(kRootVersion, diff_states(State{}, s));
  g.extend(base, set_count("bar", 3));
  report = g.receive_update(base, "theirs", set_count("bar", 3), resolver);
  return g;
}

}  // namespace

TEST_CASE("state_at and extend") {
  VersionGraph g(nullptr, counter());
  CHECK(g.state_at(kRootVersion).empty());
  for (int i = 0; i < 6; ++i) {
    g.extend(g.head(), Diff{{{"Line", std::int64_t{i}},
                             ObjectDelta::added({{"line_num", std::int64_t{i}}, {"line", std::string("x")}})}});
  }
  CHECK(g.state_at(g.head()) == lines(6));
  CHECK(g.vertex_count() == 7);

  auto head = g.head();
  auto fork = g.parents(head).front();
  auto sibling = g.extend(fork, Diff{});
  CHECK(g.head() == head);
  CHECK(g.state_at(sibling) == g.state_at(fork));
  CHECK(g.children(fork).size() == 2);
  CHECK_THROWS_AS(g.extend("nope", Diff{}), Error);
  CHECK_THROWS_AS(g.state_at("nope"), Error);
  CHECK_THROWS_AS(g.update_ref("x", "nope"), Error);
}

TEST_CASE("extend in the commit example") {
  VersionGraph g(nullptr, sequence({"632e", "3a27"}));
  State five;
  for (int i = 0; i < 5; ++i) five.put(ObjectState{"Line", std::int64_t{i}, {{"line_num", std::int64_t{i}}, {"line", std::string("l")}}});
  CHECK(g.extend(kRootVersion, diff_states(State{}, five)) == "632e");
  CHECK(g.extend("632e", add_line(5, "bar")) == "3a27");
  CHECK(g.head() == "3a27");
  auto [delta, to] = g.delta_between("632e");
  CHECK(to == "3a27");
  CHECK(delta == add_line(5, "bar"));
  g.update_ref(kSnapshotRef, "3a27");
  auto removed = g.garbage_collect();
  CHECK(removed == std::set<VersionId>{"632e"});
  CHECK(g.vertices() == std::vector<VersionId>{"3a27", kRootVersion});
  CHECK(g.state_at("3a27").size() == 6);
}

TEST_CASE("receive_update fast-forwards and merges") {
  SUBCASE("fast-forward skips the resolver") {
    VersionGraph g(nullptr, counter());
    bool called = false;
    auto r = g.receive_update(kRootVersion, "peer1", add_line(0, "foo"), [&](const MergeInput& in) {
      called = true;
      return in.update_not_conflicting();
    });
    CHECK_FALSE(called);
    CHECK_FALSE(r.conflicted);
    CHECK(g.head() == "peer1");
    CHECK(r.merged_version == "peer1");
  }
  SUBCASE("buggy sum") {
    MergeReport r;
    auto g = forked([](const MergeInput& in) { return add_counts(in, false); }, r);
    CHECK(r.resolver_invoked);
    CHECK(count_of(g.state_at(g.head()), "bar") == 6);
    CHECK(g.parents(g.head()).size() == 2);
  }
  SUBCASE("fixed sum") {
    MergeReport r;
    auto g = forked([](const MergeInput& in) { return add_counts(in, true); }, r);
    CHECK(count_of(g.state_at(g.head()), "bar") == 4);
    materialize(g);
  }
  SUBCASE("the resolver sees orig, yours and theirs") {
    MergeReport r;
    forked(
        [](const MergeInput& in) {
          REQUIRE(in.conflicts.size() == 1);
          const auto& c = in.conflicts.front();
          CHECK(std::get<std::int64_t>(c.orig->at("count")) == 2);
          CHECK(std::get<std::int64_t>(c.yours->at("count")) == 3);
          CHECK(std::get<std::int64_t>(c.theirs->at("count")) == 3);
          return in.update_not_conflicting();
        },
        r);
  }
  SUBCASE("disjoint changes merge without the resolver") {
    VersionGraph g(nullptr, counter());
    auto base = g.extend(kRootVersion, add_line(0, "a"));
    g.extend(base, add_line(1, "b"));
    bool called = false;
    auto r = g.receive_update(base, "theirs", add_line(2, "c"), [&](const MergeInput& in) {
      called = true;
      return in.update_not_conflicting();
    });
    CHECK_FALSE(called);
    CHECK_FALSE(r.conflicted);
    CHECK(g.state_at(g.head()).size() == 3);
  }
  SUBCASE("a non-conforming merge is rejected") {
    SchemaRegistry reg;
    reg.register_schema("WordCount", "word", {{"word", ValueKind::string}, {"count", ValueKind::integer}});
    VersionGraph g(&reg, counter());
    auto base = g.extend(kRootVersion, diff_states(State{}, [] {
                           State s;
                           s.put(count("bar", 2));
                           return s;
                         }()));
    g.extend(base, set_count("bar", 3));
    CHECK_THROWS_AS(g.receive_update(base, "theirs", set_count("bar", 4),
                                     [](const MergeInput& in) {
                                       auto s = in.update_not_conflicting();
                                       s.put(ObjectState{"WordCount", std::string("bar"), {{"word", std::string("bar")}}});
                                       return s;
                                     }),
                    Error);
  }
}

TEST_CASE("fixed merge converges in either delivery order") {
  auto run = [](bool swap) {
    VersionGraph g(nullptr, counter());
    State s;
    s.put(count("bar", 2));
    auto base = g.extend(kRootVersion, diff_states(State{}, s));
    auto fixed = [](const MergeInput& in) { return add_counts(in, true); };
    std::vector<std::pair<std::string, std::int64_t>> updates{{"w1", 3}, {"w2", 5}};
    if (swap) std::swap(updates[0], updates[1]);
    for (const auto& [id, c] : updates) g.receive_update(base, id, set_count("bar", c), fixed);
    return g.state_at(g.head());
  };
  CHECK(run(false) == run(true));
  CHECK(count_of(run(false), "bar") == 6);
}

TEST_CASE("delta_between") {
  Universe u{2, 4, 3, 3};
  Gen gen(3);
  for (int round = 0; round < 30; ++round) {
    VersionGraph g(nullptr, counter());
    for (int i = 0; i < 8; ++i) g.extend(g.head(), gen.diff(u, g.state_at(g.head())));
    auto [empty, same] = g.delta_between(g.head());
    CHECK(empty.empty());
    CHECK(same == g.head());
    for (const auto& v : g.vertices()) {
      auto [d, head] = g.delta_between(v);
      CHECK(apply_diff(g.state_at(v), d) == g.state_at(head));
    }
  }
  // A sibling branch has to go through the fallback.
  Gen g2(9);
  for (int round = 0; round < 20; ++round) {
    auto g = random_graph(g2, u, 20);
    for (const auto& v : g.vertices()) {
      auto [d, head] = g.delta_between(v);
      CHECK(apply_diff(g.state_at(v), d) == g.state_at(head));
    }
  }
}

TEST_CASE("garbage collection on random graphs") {
  Universe u{2, 3, 2, 3};
  Gen gen(77);
  int total_removed = 0;
  for (int round = 0; round < 150; ++round) {
    auto g = random_graph(gen, u, 2 + gen.below(49));
    auto before = g.vertex_count();
    CHECK(gc_mismatch(g) == "");
    total_removed += static_cast<int>(before - g.vertex_count());
  }
  CHECK(total_removed > 0);
}

TEST_CASE("garbage collection keeps referenced versions") {
  VersionGraph g(nullptr, counter());
  std::vector<VersionId> chain;
  for (int i = 0; i < 5; ++i) {
    chain.push_back(g.extend(g.head(), add_line(i, "x")));
    g.update_ref("r" + std::to_string(i), chain.back());
  }
  CHECK(g.garbage_collect().empty());
  g.remove_ref("r2");
  CHECK(g.garbage_collect() == std::set<VersionId>{chain[2]});
}

TEST_CASE("rollback") {
  VersionGraph g(nullptr, counter());
  auto a = g.extend(kRootVersion, add_line(0, "a"));
  auto b = g.extend(a, add_line(1, "b"));
  auto sibling = g.extend(a, add_line(2, "c"));
  auto c = g.extend(b, add_line(3, "d"));
  g.update_ref("peer", c);
  CHECK_THROWS_AS(g.rollback(sibling), Error);
  g.rollback(b);
  CHECK(g.head() == b);
  CHECK_FALSE(g.contains(c));
  CHECK(g.ref("peer") == b);
  CHECK(g.contains(sibling));
  g.rollback(kRootVersion);
  CHECK(g.state_at(g.head()).empty());
  CHECK(g.vertex_count() == 1);
}

TEST_CASE("ancestry and lowest common ancestor") {
  Universe u{1, 4, 2, 3};
  Gen gen(12);
  for (int round = 0; round < 40; ++round) {
    auto g = random_graph(gen, u, 15);
    auto vs = g.vertices();
    // Brute-force reachability from the edge list.
    std::map<VersionId, std::set<VersionId>> up;
    for (const auto& v : vs) {
      std::set<VersionId> seen{v};
      std::deque<VersionId> todo{v};
      while (!todo.empty()) {
        auto x = todo.front();
        todo.pop_front();
        for (const auto& p : g.parents(x)) {
          if (seen.insert(p).second) todo.push_back(p);
        }
      }
      up[v] = seen;
    }
    for (const auto& a : vs) {
      CHECK(g.ancestors(a) == up[a]);
      for (const auto& b : vs) {
        CHECK(g.is_ancestor(a, b) == (up[b].count(a) == 1));
        std::set<VersionId> common;
        for (const auto& x : up[a]) {
          if (up[b].count(x) != 0) common.insert(x);
        }
        // Lowest: no other common ancestor below it; ties to the smallest id.
        std::optional<VersionId> best;
        for (const auto& x : common) {
          bool lowest = true;
          for (const auto& y : common) {
            if (y != x && up[y].count(x) != 0) lowest = false;
          }
          if (lowest && (!best || x < *best)) best = x;
        }
        CHECK(g.lowest_common_ancestor(a, b) == *best);
      }
    }
  }
}

TEST_CASE("history export round-trips") {
  Universe u{2, 3, 2, 3};
  Gen gen(4);
  for (int round = 0; round < 20; ++round) {
    auto g = random_graph(gen, u, 25);
    auto j = g.to_json();
    CHECK(j.contains("vertices"));
    CHECK(j.contains("edges"));
    CHECK(j["head"] == g.head());
    auto back = VersionGraph::from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.to_json() == j);
    CHECK(back.state_at(back.head()) == g.state_at(g.head()));
  }
}
