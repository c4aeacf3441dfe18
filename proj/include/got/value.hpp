#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>

namespace got {

// Alternative order matches ValueKind.
using Value = std::variant<std::int64_t, double, std::string, bool>;

enum class ValueKind { integer = 0, floating = 1, string = 2, boolean = 3 };

using DimMap = std::map<std::string, Value>;

inline ValueKind kind_of(const Value& v) { return static_cast<ValueKind>(v.index()); }

std::string_view to_string(ValueKind kind);
ValueKind parse_value_kind(std::string_view text);

// Human-readable rendering ("5", "bar", "true", "1.5").
std::string display(const Value& v);

// Type-tagged rendering used for keys: "i:5", "s:bar", "b:true", "f:1.5".
std::string tagged(const Value& v);
Value parse_tagged(std::string_view text);

}  // namespace got
