#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emberish {

/// Bad input: malformed files, invalid configuration, broken invariants in
/// user-provided data. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Join specification syntax error carrying the byte offset of the
/// offending token.
class ParseError : public ValidationError {
  public:
    ParseError(const std::string& message, std::size_t offset)
        : ValidationError(message + " at offset " + std::to_string(offset)),
          offset_(offset), reason_(message)
    {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& reason() const noexcept { return reason_; }

  private:
    std::size_t offset_;
    std::string reason_;
};

/// Failure while running a pipeline stage (I/O, diverging training, ...).
/// The CLI maps these to exit code 2.
class RuntimeFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace emberish
