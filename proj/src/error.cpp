#include "nbql/error.hpp"

namespace nbql {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::InvalidPoint: return "invalid_point";
    case ErrorKind::EmptyPool: return "empty_pool";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Protocol: return "protocol_error";
    case ErrorKind::Config: return "config_error";
    case ErrorKind::DegenerateMetric: return "degenerate_metric";
    case ErrorKind::Env: return "env_error";
    case ErrorKind::Policy: return "policy_error";
    case ErrorKind::DegenerateCurve: return "degenerate_curve";
    case ErrorKind::Io: return "io_error";
  }
  return "unknown";
}

}  // namespace nbql
