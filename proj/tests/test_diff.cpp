#include <doctest.h>

#include "got/error.hpp"
#include "oracles.hpp"

using namespace got;

namespace {

using namespace testing;

void check_instance(const State& base, const Diff& yours, const Diff& theirs, const std::vector<ObjectKey>& keys) {
  CHECK(conflict_mismatch(base, yours, theirs, keys) == "");
}

}  // namespace

TEST_CASE("application identity and strictness") {
  Universe u{2, 3, 2, 3};
  Gen g(11);
  for (int i = 0; i < 200; ++i) {
    auto s = g.state(u);
    CHECK(apply_diff(s, Diff{}) == s);
    CHECK(diff_states(s, s).empty());
  }
  ObjectKey k{"T0", std::int64_t{0}};
  State empty;
  State one = single(u.object(k, {1, 1}));
  CHECK_THROWS_AS(apply_diff(empty, Diff{{k, ObjectDelta::modified({{"d0", std::int64_t{0}}})}}), Error);
  CHECK_THROWS_AS(apply_diff(empty, Diff{{k, ObjectDelta::deleted()}}), Error);
  CHECK_THROWS_AS(apply_diff(one, Diff{{k, ObjectDelta::added(u.object(k, {0, 0}).dims)}}), Error);
}

TEST_CASE("add then delete cancels") {
  ObjectKey k{"T0", std::int64_t{4}};
  Universe u;
  auto d = compose_diffs(Diff{{k, ObjectDelta::added(u.object(k, {1}).dims)}}, Diff{{k, ObjectDelta::deleted()}});
  CHECK(d.empty());
}

TEST_CASE("exhaustive single-object algebra") {
  for (int dims = 1; dims <= 4; ++dims) {
    Universe u{1, 1, dims, 2};
    ObjectKey k = u.keys().front();
    int cases = 0;
    for (const auto& base : u.object_states(k)) {
      auto s = single(base);
      for (const auto& d1 : u.deltas(k, base)) {
        auto mid = *apply_one(k, base, d1);
        auto s1 = apply_diff(s, single(k, d1));
        REQUIRE(s1 == single(mid));
        for (const auto& d2 : u.deltas(k, mid)) {
          auto end = *apply_one(k, mid, d2);
          auto composed = compose_diffs(single(k, d1), single(k, d2));
          CHECK(apply_diff(s, composed) == single(end));
          CHECK(apply_diff(s1, single(k, d2)) == single(end));
          ++cases;
        }
        // detect_conflicts sees every pair of sides valid on the same base.
        for (const auto& d2 : u.deltas(k, base)) check_instance(s, single(k, d1), single(k, d2), {k});
      }
      for (const auto& to : u.object_states(k)) {
        auto t = single(to);
        CHECK(apply_diff(s, diff_states(s, t)) == t);
      }
    }
    CHECK(cases > 0);
  }
}

TEST_CASE("random multi-object algebra up to 3 types x 5 pkeys x 4 dims") {
  Gen g(2024);
  for (int types = 1; types <= 3; ++types) {
    for (int pkeys = 1; pkeys <= 5; ++pkeys) {
      for (int dims = 1; dims <= 4; ++dims) {
        Universe u{types, pkeys, dims, 3};
        auto keys = u.keys();
        for (int i = 0; i < 25; ++i) {
          auto s = g.state(u);
          auto d1 = g.diff(u, s);
          auto s1 = apply_diff(s, d1);
          auto d2 = g.diff(u, s1);
          CHECK(apply_diff(s1, d2) == apply_diff(s, compose_diffs(d1, d2)));
          auto t = g.state(u);
          CHECK(apply_diff(s, diff_states(s, t)) == t);
          check_instance(s, d1, g.diff(u, s), keys);
        }
      }
    }
  }
}

TEST_CASE("conflict examples") {
  Universe u{1, 1, 2, 5};
  ObjectKey k{"T0", std::int64_t{0}};
  auto base = single(u.object(k, {2, 0}));
  auto y = Diff{{k, ObjectDelta::modified({{"d0", std::int64_t{3}}})}};

  SUBCASE("disjoint dimensions merge without the resolver") {
    auto r = detect_conflicts(base, y, Diff{{k, ObjectDelta::modified({{"d1", std::int64_t{4}}})}});
    CHECK(r.concurrent.empty());
    CHECK(r.nonconflicting_theirs.size() == 1);
  }
  SUBCASE("equal writes are concurrent but not conflicting") {
    auto r = detect_conflicts(base, y, y);
    CHECK(r.conflicting.empty());
    CHECK(r.concurrent.count(k) == 1);
  }
  SUBCASE("unequal writes conflict") {
    auto r = detect_conflicts(base, y, Diff{{k, ObjectDelta::modified({{"d0", std::int64_t{4}}})}});
    CHECK(r.conflicting.count(k) == 1);
  }
  SUBCASE("delete against modify conflicts") {
    auto r = detect_conflicts(base, y, Diff{{k, ObjectDelta::deleted()}});
    CHECK(r.conflicting.count(k) == 1);
  }
  SUBCASE("two deletes do not") {
    auto del = Diff{{k, ObjectDelta::deleted()}};
    auto r = detect_conflicts(base, del, del);
    CHECK(r.concurrent.empty());
    CHECK(r.conflicting.empty());
  }
}
