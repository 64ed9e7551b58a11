#include "eyecontact/error.hpp"

namespace eyecontact {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Schema: return "schema error";
    case ErrorCode::Dimension: return "dimension mismatch";
    case ErrorCode::Numeric: return "numeric error";
    case ErrorCode::Degenerate: return "degenerate geometry";
    case ErrorCode::NoIntersection: return "no intersection";
    case ErrorCode::NoDeviceCluster: return "no device cluster";
    case ErrorCode::SingleClass: return "single class";
    case ErrorCode::NotConverged: return "not converged";
    case ErrorCode::UnsupportedVersion: return "unsupported version";
  }
  return "unknown error";
}

}  // namespace eyecontact
