#pragma once

#include <stdexcept>
#include <string>

namespace launderscope {

/// Broad failure class; the CLI maps each to its exit code.
enum class ErrorKind { Usage, Data, Scorer };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad input data: unreadable files, malformed manifests, degenerate sets.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Invalid parameters or configuration supplied by the caller.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

}  // namespace launderscope
