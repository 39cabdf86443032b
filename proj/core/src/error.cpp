#include "gazelab/error.hpp"

namespace gazelab {

ParseError::ParseError(std::size_t line, const std::string& what)
    : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

}  // namespace gazelab
