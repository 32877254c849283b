#pragma once

#include <stdexcept>
#include <string>

namespace sept {

// Exit codes / CLI error prefixes. Keep stable: scripts match on them.
enum class ErrorCode : int {
  internal = 1,
  validation = 2,
  format = 3,
  io = 4,
  usage = 5,
  verify = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Inputs violate a documented precondition or invariant.
struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorCode::validation, what) {}
};

// A byte stream or text file does not parse as the expected format.
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCode::format, what) {}
};

// The operating system refused to read or write.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

// Command line is malformed (CLI layer only).
struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorCode::usage, what) {}
};

}  // namespace sept
