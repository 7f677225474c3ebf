#include "prnet/error.hpp"

namespace prnet {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "shape error";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::format: return "format error";
    case ErrorKind::io: return "io error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::usage: return "usage error";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string op, const std::string& detail)
    : std::runtime_error(op + ": " + to_string(kind) + ": " + detail), kind_(kind), op_(std::move(op)) {}

}  // namespace prnet
