#include "got/value.hpp"

#include <charconv>

#include <nlohmann/json.hpp>

#include "got/error.hpp"

namespace got {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::duplicate: return "duplicate";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::unknown_version: return "unknown_version";
    case ErrorCode::invalid_diff: return "invalid_diff";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::stale_handle: return "stale_handle";
    case ErrorCode::resolver: return "resolver";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::network: return "network";
  }
  return "unknown";
}

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::integer: return "int";
    case ValueKind::floating: return "float";
    case ValueKind::string: return "str";
    case ValueKind::boolean: return "bool";
  }
  return "?";
}

ValueKind parse_value_kind(std::string_view text) {
  if (text == "int" || text == "integer") return ValueKind::integer;
  if (text == "float" || text == "floating") return ValueKind::floating;
  if (text == "str" || text == "string") return ValueKind::string;
  if (text == "bool" || text == "boolean") return ValueKind::boolean;
  throw Error(ErrorCode::invalid_argument, "unknown value kind '" + std::string(text) + "'");
}

namespace {

std::string render_double(double d) { return nlohmann::json(d).dump(); }

}  // namespace

std::string display(const Value& v) {
  switch (kind_of(v)) {
    case ValueKind::integer: return std::to_string(std::get<std::int64_t>(v));
    case ValueKind::floating: return render_double(std::get<double>(v));
    case ValueKind::string: return std::get<std::string>(v);
    case ValueKind::boolean: return std::get<bool>(v) ? "true" : "false";
  }
  return {};
}

std::string tagged(const Value& v) {
  switch (kind_of(v)) {
    case ValueKind::integer: return "i:" + display(v);
    case ValueKind::floating: return "f:" + display(v);
    case ValueKind::string: return "s:" + display(v);
    case ValueKind::boolean: return "b:" + display(v);
  }
  return {};
}

Value parse_tagged(std::string_view text) {
  if (text.size() < 2 || text[1] != ':') {
    throw Error(ErrorCode::protocol, "malformed tagged value '" + std::string(text) + "'");
  }
  auto body = text.substr(2);
  switch (text[0]) {
    case 'i': {
      std::int64_t out = 0;
      auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out);
      if (ec != std::errc{} || ptr != body.data() + body.size()) break;
      return out;
    }
    case 'f': {
      auto parsed = nlohmann::json::parse(body, nullptr, false);
      if (!parsed.is_number()) break;
      return parsed.get<double>();
    }
    case 's': return std::string(body);
    case 'b':
      if (body == "true") return true;
      if (body == "false") return false;
      break;
    default: break;
  }
  throw Error(ErrorCode::protocol, "malformed tagged value '" + std::string(text) + "'");
}

}  // namespace got
