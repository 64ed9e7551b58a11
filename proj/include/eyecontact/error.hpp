#pragma once

#include <stdexcept>
#include <string>

namespace eyecontact {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Parse,
  Schema,
  Dimension,
  Numeric,
  Degenerate,
  NoIntersection,
  NoDeviceCluster,
  SingleClass,
  NotConverged,
  UnsupportedVersion,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eyecontact
