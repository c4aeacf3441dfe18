#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace got {

enum class ErrorCode {
  invalid_argument,
  duplicate,
  not_found,
  unknown_version,
  invalid_diff,
  conflict,
  precondition,
  stale_handle,
  resolver,
  protocol,
  network,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace got
