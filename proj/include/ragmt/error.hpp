#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ragmt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record in a line-oriented input file could not be accepted.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string detail, std::string file = {})
        : Error((file.empty() ? "" : file + ": ") + "line " + std::to_string(line) + ": " + detail),
          line_(line), detail_(std::move(detail)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

} // namespace ragmt
