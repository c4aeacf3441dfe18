#pragma once

#include <nlohmann/json.hpp>

#include "got/diff.hpp"
#include "got/schema.hpp"
#include "got/state.hpp"

namespace got {

using json = nlohmann::json;

json value_to_json(const Value& v);
Value value_from_json(const json& j);

json dims_to_json(const DimMap& dims);
DimMap dims_from_json(const json& j);

// "type_name:pkey" with a type-tagged pkey, e.g. "Line:i:5".
std::string key_string(const ObjectKey& key);
ObjectKey parse_key_string(std::string_view text);

// {"Line:i:5": {"kind": "new", "dims": {...}}}
json diff_to_json(const Diff& diff);
Diff diff_from_json(const json& j);

// {"Line": {"i:0": {"line_num": 0, "line": "foo"}}}
json state_to_json(const State& state);
State state_from_json(const json& j);

json schema_to_json(const TypeSchema& schema);
TypeSchema schema_from_json(const json& j);

}  // namespace got
