#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace robophoto {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSONL, JSON, PGM). Carries the 1-based line when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class NoFacesError : public Error {
public:
    NoFacesError() : Error("picture has no faces") {}
};

/// Numeric failure (divergence, undefined statistic).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace robophoto
