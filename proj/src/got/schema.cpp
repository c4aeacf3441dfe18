#include "got/schema.hpp"

#include <set>

#include "got/error.hpp"

namespace got {

const Dimension* TypeSchema::find(std::string_view dim) const {
  for (const auto& d : dimensions) {
    if (d.name == dim) return &d;
  }
  return nullptr;
}

const TypeSchema& SchemaRegistry::register_schema(std::string name, std::string primary_key,
                                                  std::vector<Dimension> dims) {
  return add(TypeSchema{std::move(name), std::move(primary_key), std::move(dims)});
}

const TypeSchema& SchemaRegistry::add(TypeSchema schema) {
  if (schema.name.empty() || schema.name.find(':') != std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "invalid type name '" + schema.name + "'");
  }
  if (schemas_.count(schema.name) != 0) {
    throw Error(ErrorCode::duplicate, "type '" + schema.name + "' already registered");
  }
  std::set<std::string> seen;
  for (const auto& d : schema.dimensions) {
    if (!seen.insert(d.name).second) {
      throw Error(ErrorCode::invalid_argument,
                  "duplicate dimension '" + d.name + "' in type '" + schema.name + "'");
    }
  }
  if (schema.find(schema.primary_key) == nullptr) {
    throw Error(ErrorCode::invalid_argument, "primary key '" + schema.primary_key +
                                                 "' is not a dimension of '" + schema.name + "'");
  }
  auto name = schema.name;
  return schemas_.emplace(std::move(name), std::move(schema)).first->second;
}

const TypeSchema* SchemaRegistry::find(std::string_view name) const {
  auto it = schemas_.find(name);
  return it == schemas_.end() ? nullptr : &it->second;
}

const TypeSchema& SchemaRegistry::at(std::string_view name) const {
  if (const auto* s = find(name)) return *s;
  throw Error(ErrorCode::not_found, "type '" + std::string(name) + "' is not registered");
}

std::vector<std::string> SchemaRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : schemas_) out.push_back(name);
  return out;
}

ObjectState SchemaRegistry::make(std::string_view type, DimMap dims) const {
  const auto& schema = at(type);
  for (auto& [name, value] : dims) {
    const auto* d = schema.find(name);
    if (d != nullptr && d->kind == ValueKind::floating && kind_of(value) == ValueKind::integer) {
      value = static_cast<double>(std::get<std::int64_t>(value));
    }
  }
  auto it = dims.find(schema.primary_key);
  if (it == dims.end()) {
    throw Error(ErrorCode::invalid_argument,
                "object of '" + schema.name + "' lacks primary key '" + schema.primary_key + "'");
  }
  ObjectState obj{schema.name, it->second, std::move(dims)};
  validate(obj);
  return obj;
}

void SchemaRegistry::validate(const ObjectState& obj) const {
  const auto& schema = at(obj.type_name);
  if (obj.dims.size() != schema.dimensions.size()) {
    throw Error(ErrorCode::invalid_argument,
                "object " + to_string(obj.key()) + " does not carry exactly its type's dimensions");
  }
  for (const auto& d : schema.dimensions) {
    auto it = obj.dims.find(d.name);
    if (it == obj.dims.end()) {
      throw Error(ErrorCode::invalid_argument,
                  "object " + to_string(obj.key()) + " is missing dimension '" + d.name + "'");
    }
    if (kind_of(it->second) != d.kind) {
      throw Error(ErrorCode::invalid_argument, "dimension '" + d.name + "' of " +
                                                   to_string(obj.key()) + " must be " +
                                                   std::string(to_string(d.kind)));
    }
  }
  if (obj.dims.at(schema.primary_key) != obj.pkey) {
    throw Error(ErrorCode::invalid_argument,
                "object " + to_string(obj.key()) + " primary key disagrees with its dimension");
  }
}

void SchemaRegistry::validate(const State& state) const {
  for (const auto& [type, objects] : state.types()) {
    for (const auto& [pkey, obj] : objects) {
      if (obj.type_name != type || obj.pkey != pkey) {
        throw Error(ErrorCode::invalid_argument, "object filed under the wrong key");
      }
      validate(obj);
    }
  }
}

}  // namespace got
