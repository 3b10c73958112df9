#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace motionkit {

// Base for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (bad JSON, bad PPM, ...). Carries location info.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line_, std::size_t offset_)
        : Error(msg), line(line_), offset(offset_) {}
    std::size_t line = 0;    // 1-based line of the first bad byte
    std::size_t offset = 0;  // 0-based byte offset
};

// Structurally valid input that violates the documented schema.
struct SchemaError : Error {
    explicit SchemaError(const std::string& field_, const std::string& detail = "")
        : Error(detail.empty() ? "schema violation at field '" + field_ + "'"
                               : "schema violation at field '" + field_ + "': " + detail),
          field(field_) {}
    std::string field;
};

struct IoError : Error {
    explicit IoError(const std::string& path_, const std::string& detail = "")
        : Error(detail.empty() ? "cannot read '" + path_ + "'"
                               : "cannot read '" + path_ + "': " + detail),
          path(path_) {}
    std::string path;
};

struct ArgumentError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct TopologyError : Error {
    using Error::Error;
};

struct AnchorError : Error {
    using Error::Error;
};

struct PoolError : Error {
    using Error::Error;
};

struct EmptyPoolError : PoolError {
    using PoolError::PoolError;
};

struct IndexError : Error {
    using Error::Error;
};

struct ScheduleError : Error {
    using Error::Error;
};

struct ContractError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct DegenerateError : Error {
    using Error::Error;
};

}  // namespace motionkit
