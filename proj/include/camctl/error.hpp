#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace camctl {

// Failure classes. The CLI maps these onto exit codes.
enum class ErrorKind {
  kInvalidArgument,  // caller broke a precondition
  kData,             // malformed or inconsistent input data
  kFormat,           // binary/text file could not be decoded
  kNumerical,        // solver breakdown
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Decoding failures carry the byte offset where decoding stopped.
class FormatError : public Error {
 public:
  enum class Cause { kUnrecognized, kTruncated, kSizeMismatch, kInvalidValue, kSyntax };

  FormatError(Cause cause, std::size_t offset, const std::string& what)
      : Error(ErrorKind::kFormat, what), cause_(cause), offset_(offset) {}

  Cause cause() const noexcept { return cause_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Cause cause_;
  std::size_t offset_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace camctl
