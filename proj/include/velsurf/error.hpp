#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace velsurf {

/// Input data violates a format or domain rule (bad file, bad flag value, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parse failure that can point at the offending line.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& detail, const std::string& source = "")
        : DataError((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + detail),
          line_(line),
          detail_(detail) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

/// Persisted model/dataset files that fail integrity checks.
class FormatError : public DataError {
public:
    enum class Kind { version, checksum, truncated, malformed };

    FormatError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Solver or numerical routine could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace velsurf
