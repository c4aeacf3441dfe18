#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "got/value.hpp"

namespace got {

struct ObjectKey {
  std::string type_name;
  Value pkey;

  friend bool operator<(const ObjectKey& a, const ObjectKey& b) {
    return std::tie(a.type_name, a.pkey) < std::tie(b.type_name, b.pkey);
  }
  friend bool operator==(const ObjectKey& a, const ObjectKey& b) {
    return a.type_name == b.type_name && a.pkey == b.pkey;
  }
};

std::string to_string(const ObjectKey& key);

struct ObjectState {
  std::string type_name;
  Value pkey;
  DimMap dims;

  ObjectKey key() const { return {type_name, pkey}; }
  const Value& at(const std::string& dim) const;

  friend bool operator==(const ObjectState& a, const ObjectState& b) {
    return a.type_name == b.type_name && a.pkey == b.pkey && a.dims == b.dims;
  }
};

/// Materialized objects grouped by type, ordered by primary key. Types with no
/// objects are never stored, so equality is purely about the objects held.
class State {
 public:
  using TypeMap = std::map<Value, ObjectState>;

  const ObjectState* find(const ObjectKey& key) const;
  bool contains(const ObjectKey& key) const { return find(key) != nullptr; }

  /// Inserts or replaces.
  void put(ObjectState obj);
  bool erase(const ObjectKey& key);

  const TypeMap* objects(const std::string& type_name) const;
  std::vector<ObjectState> all() const;
  const std::map<std::string, TypeMap>& types() const { return types_; }

  std::size_t size() const;
  bool empty() const { return types_.empty(); }

  friend bool operator==(const State& a, const State& b) { return a.types_ == b.types_; }

 private:
  std::map<std::string, TypeMap> types_;
};

}  // namespace got
