#pragma once

#include <stdexcept>
#include <string>

namespace prnet {

enum class ErrorKind {
  shape,    // operand shapes disagree
  config,   // invalid model / command configuration
  format,   // malformed file contents
  io,       // file could not be read or written
  numeric,  // NaN / Inf where finite values are required
  usage,    // caller violated an argument contract
};

const char* to_string(ErrorKind kind);

/// Error raised by every prnet operation. `op()` names the failing operation.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string op, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& op() const noexcept { return op_; }

 private:
  ErrorKind kind_;
  std::string op_;
};

}  // namespace prnet
