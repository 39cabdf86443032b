#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gazelab {

/// Input violates a documented contract (bad row, broken invariant, bad parameter).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A row-level parse failure. `line()` is 1-based and counts the header.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Filesystem or stream failure (missing file, unwritable directory).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gazelab
