#pragma once

#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "got/state.hpp"
#include "got/value.hpp"

namespace got {

struct Dimension {
  std::string name;
  ValueKind kind;

  bool operator==(const Dimension&) const = default;
};

struct TypeSchema {
  std::string name;
  std::string primary_key;
  std::vector<Dimension> dimensions;

  const Dimension* find(std::string_view dim) const;
  bool operator==(const TypeSchema&) const = default;
};

/// The set of shared types a dataframe tracks. Schemas are immutable once
/// registered.
class SchemaRegistry {
 public:
  const TypeSchema& register_schema(std::string name, std::string primary_key,
                                    std::vector<Dimension> dims);
  const TypeSchema& add(TypeSchema schema);

  const TypeSchema* find(std::string_view name) const;
  const TypeSchema& at(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> names() const;
  std::size_t size() const { return schemas_.size(); }

  /// Builds an object of `type`, checking every dimension is present with the
  /// declared kind. Integer literals are accepted for float dimensions.
  ObjectState make(std::string_view type, DimMap dims) const;

  /// Throws if `obj` does not match its schema exactly.
  void validate(const ObjectState& obj) const;
  void validate(const State& state) const;

 private:
  std::map<std::string, TypeSchema, std::less<>> schemas_;
};

}  // namespace got
