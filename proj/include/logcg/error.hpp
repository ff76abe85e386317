#pragma once

#include <stdexcept>
#include <string>

namespace logcg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or does not follow its declared format.
class FormatError : public Error {
 public:
  FormatError(const std::string& where, const std::string& what)
      : Error(where + ": " + what), where_(where) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace logcg
