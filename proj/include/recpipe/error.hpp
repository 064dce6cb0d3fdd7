#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recpipe {

// Bad input data or configuration supplied by the caller. The CLI maps these
// to exit code 2; anything else escaping a subcommand is exit code 1.
class UserError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public UserError {
public:
    ParseError(std::size_t line, const std::string& what)
        : UserError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class IoError : public UserError {
public:
    using UserError::UserError;
};

}  // namespace recpipe
