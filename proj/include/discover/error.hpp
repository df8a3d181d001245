#pragma once

#include <stdexcept>
#include <string>

namespace discover {

// Broad failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  invalid_argument,
  config,
  data,
  schema,
  degenerate,
  pipeline,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) fail(kind, message);
}

}  // namespace discover
