#include "got/serialize.hpp"

#include "got/error.hpp"

namespace got {

json value_to_json(const Value& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

Value value_from_json(const json& j) {
  switch (j.type()) {
    case json::value_t::boolean: return j.get<bool>();
    case json::value_t::number_integer: return j.get<std::int64_t>();
    case json::value_t::number_unsigned: return static_cast<std::int64_t>(j.get<std::uint64_t>());
    case json::value_t::number_float: return j.get<double>();
    case json::value_t::string: return j.get<std::string>();
    default: break;
  }
  throw Error(ErrorCode::protocol, "unsupported dimension value " + j.dump());
}

json dims_to_json(const DimMap& dims) {
  json out = json::object();
  for (const auto& [name, value] : dims) out[name] = value_to_json(value);
  return out;
}

DimMap dims_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::protocol, "dimension map must be an object");
  DimMap out;
  for (const auto& [name, value] : j.items()) out.emplace(name, value_from_json(value));
  return out;
}

std::string key_string(const ObjectKey& key) { return key.type_name + ":" + tagged(key.pkey); }

ObjectKey parse_key_string(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::protocol, "malformed object key '" + std::string(text) + "'");
  }
  return ObjectKey{std::string(text.substr(0, colon)), parse_tagged(text.substr(colon + 1))};
}

json diff_to_json(const Diff& diff) {
  json out = json::object();
  for (const auto& [key, delta] : diff) {
    out[key_string(key)] = {{"kind", to_string(delta.kind)}, {"dims", dims_to_json(delta.dims)}};
  }
  return out;
}

Diff diff_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::protocol, "diff must be an object");
  Diff out;
  for (const auto& [k, entry] : j.items()) {
    auto kind = entry.at("kind").get<std::string>();
    DimMap dims = entry.contains("dims") ? dims_from_json(entry.at("dims")) : DimMap{};
    if (kind == "new") {
      out.set(parse_key_string(k), ObjectDelta::added(std::move(dims)));
    } else if (kind == "mod") {
      out.set(parse_key_string(k), ObjectDelta::modified(std::move(dims)));
    } else if (kind == "del") {
      out.set(parse_key_string(k), ObjectDelta::deleted());
    } else {
      throw Error(ErrorCode::protocol, "unknown delta kind '" + kind + "'");
    }
  }
  return out;
}

json state_to_json(const State& state) {
  json out = json::object();
  for (const auto& [type, objects] : state.types()) {
    json bucket = json::object();
    for (const auto& [pkey, obj] : objects) bucket[tagged(pkey)] = dims_to_json(obj.dims);
    out[type] = std::move(bucket);
  }
  return out;
}

State state_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::protocol, "state must be an object");
  State out;
  for (const auto& [type, bucket] : j.items()) {
    for (const auto& [pkey, dims] : bucket.items()) {
      out.put(ObjectState{type, parse_tagged(pkey), dims_from_json(dims)});
    }
  }
  return out;
}

json schema_to_json(const TypeSchema& schema) {
  json dims = json::array();
  for (const auto& d : schema.dimensions) dims.push_back({{"name", d.name}, {"kind", to_string(d.kind)}});
  return {{"name", schema.name}, {"primary_key", schema.primary_key}, {"dimensions", dims}};
}

TypeSchema schema_from_json(const json& j) {
  TypeSchema out;
  out.name = j.at("name").get<std::string>();
  out.primary_key = j.at("primary_key").get<std::string>();
  for (const auto& d : j.at("dimensions")) {
    out.dimensions.push_back({d.at("name").get<std::string>(), parse_value_kind(d.at("kind").get<std::string>())});
  }
  return out;
}

}  // namespace got
