#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "got/diff.hpp"
#include "got/schema.hpp"
#include "got/state.hpp"

namespace testing {

// A family of object types: type i has dimension names d0..d{dims-1} plus its
// integer pkey "id"; every dimension holds an int drawn from [0, values).
struct Universe {
  int types = 1;
  int pkeys = 1;
  int dims = 1;
  int values = 2;

  std::string type_name(int t) const { return "T" + std::to_string(t); }
  std::string dim_name(int d) const { return "d" + std::to_string(d); }

  got::SchemaRegistry registry() const {
    got::SchemaRegistry r;
    for (int t = 0; t < types; ++t) {
      std::vector<got::Dimension> ds{{"id", got::ValueKind::integer}};
      for (int d = 0; d < dims; ++d) ds.push_back({dim_name(d), got::ValueKind::integer});
      r.register_schema(type_name(t), "id", ds);
    }
    return r;
  }

  std::vector<got::ObjectKey> keys() const {
    std::vector<got::ObjectKey> out;
    for (int t = 0; t < types; ++t) {
      for (int p = 0; p < pkeys; ++p) out.push_back({type_name(t), std::int64_t{p}});
    }
    return out;
  }

  got::ObjectState object(const got::ObjectKey& key, const std::vector<int>& vals) const {
    got::ObjectState o{key.type_name, key.pkey, {}};
    o.dims["id"] = key.pkey;
    for (int d = 0; d < dims; ++d) o.dims[dim_name(d)] = std::int64_t{vals[d]};
    return o;
  }

  // Every full assignment of dimension values.
  std::vector<std::vector<int>> assignments() const {
    std::vector<std::vector<int>> out{{}};
    for (int d = 0; d < dims; ++d) {
      std::vector<std::vector<int>> next;
      for (const auto& a : out) {
        for (int v = 0; v < values; ++v) {
          auto b = a;
          b.push_back(v);
          next.push_back(b);
        }
      }
      out = std::move(next);
    }
    return out;
  }

  // Absent, or present with any assignment.
  std::vector<std::optional<got::ObjectState>> object_states(const got::ObjectKey& key) const {
    std::vector<std::optional<got::ObjectState>> out{std::nullopt};
    for (const auto& a : assignments()) out.push_back(object(key, a));
    return out;
  }

  // Every delta valid against `base` (nullopt = untouched).
  std::vector<std::optional<got::ObjectDelta>> deltas(const got::ObjectKey& key,
                                                      const std::optional<got::ObjectState>& base) const {
    std::vector<std::optional<got::ObjectDelta>> out{std::nullopt};
    if (!base) {
      for (const auto& a : assignments()) {
        out.push_back(got::ObjectDelta::added(object(key, a).dims));
      }
      return out;
    }
    out.push_back(got::ObjectDelta::deleted());
    // Each dimension is either left alone or set to some value.
    std::vector<got::DimMap> partial{{}};
    for (int d = 0; d < dims; ++d) {
      std::vector<got::DimMap> next;
      for (const auto& m : partial) {
        next.push_back(m);
        for (int v = 0; v < values; ++v) {
          auto n = m;
          n[dim_name(d)] = std::int64_t{v};
          next.push_back(n);
        }
      }
      partial = std::move(next);
    }
    for (auto& m : partial) {
      if (!m.empty()) out.push_back(got::ObjectDelta::modified(m));
    }
    return out;
  }
};

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int below(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  std::vector<int> assignment(const Universe& u) {
    std::vector<int> a;
    for (int d = 0; d < u.dims; ++d) a.push_back(below(u.values));
    return a;
  }

  got::State state(const Universe& u, double fill = 0.5) {
    got::State s;
    for (const auto& k : u.keys()) {
      if (chance(fill)) s.put(u.object(k, assignment(u)));
    }
    return s;
  }

  // A diff valid against `base` touching each key with probability `touch`.
  got::Diff diff(const Universe& u, const got::State& base, double touch = 0.4) {
    got::Diff d;
    for (const auto& k : u.keys()) {
      if (!chance(touch)) continue;
      if (!base.contains(k)) {
        d.set(k, got::ObjectDelta::added(u.object(k, assignment(u)).dims));
      } else if (chance(0.25)) {
        d.set(k, got::ObjectDelta::deleted());
      } else {
        got::DimMap m;
        for (int i = 0; i < u.dims; ++i) {
          if (chance(0.5)) m[u.dim_name(i)] = std::int64_t{below(u.values)};
        }
        if (m.empty()) m[u.dim_name(0)] = std::int64_t{below(u.values)};
        d.set(k, got::ObjectDelta::modified(m));
      }
    }
    return d;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace testing
