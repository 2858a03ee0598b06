#include "yieldest/errors.hpp"

namespace yieldest {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : Error("parse", file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

}  // namespace yieldest
