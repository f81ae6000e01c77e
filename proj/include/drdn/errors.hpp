#pragma once

#include <stdexcept>
#include <string>

namespace drdn {

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& msg) : std::runtime_error("shape mismatch: " + msg) {}
};

struct InvalidStack : std::runtime_error {
    explicit InvalidStack(const std::string& msg) : std::runtime_error("invalid stack: " + msg) {}
};

struct ConfigInvalid : std::runtime_error {
    explicit ConfigInvalid(const std::string& msg) : std::runtime_error("invalid config: " + msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error("numerical error: " + msg) {}
};

struct DegenerateBatch : std::runtime_error {
    explicit DegenerateBatch(const std::string& msg) : std::runtime_error("degenerate batch: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("i/o error: " + msg) {}
};

// Malformed file content; `offset` is the byte position where parsing failed.
struct FormatError : std::runtime_error {
    FormatError(const std::string& msg, long offset)
        : std::runtime_error("format error at byte " + std::to_string(offset) + ": " + msg),
          offset(offset) {}
    long offset;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, long column)
        : std::runtime_error("parse error at column " + std::to_string(column) + ": " + msg),
          column(column) {}
    long column;
};

struct IndexOutOfRange : std::out_of_range {
    explicit IndexOutOfRange(const std::string& msg) : std::out_of_range("index out of range: " + msg) {}
};

struct EpochOutOfRange : std::out_of_range {
    explicit EpochOutOfRange(const std::string& msg) : std::out_of_range("epoch out of range: " + msg) {}
};

struct ImageTooSmall : std::runtime_error {
    explicit ImageTooSmall(const std::string& msg) : std::runtime_error("image too small: " + msg) {}
};

}  // namespace drdn
