#pragma once

#include <stdexcept>
#include <string>

namespace graphflow {

enum class ErrorKind {
  kParse,
  kValidation,
  kNotFound,
  kInvalidArgument,
  kNumerical,
  kBudgetExceeded,
  kIo,
};

const char* to_string(ErrorKind kind);

// All library failures surface as this exception; the CLI turns it into a
// machine-readable JSON error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace graphflow
