#pragma once

#include <stdexcept>
#include <string>

namespace diffdepth {

// Incompatible tensor/array extents.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-range or otherwise invalid argument values.
struct ValueError : std::invalid_argument {
    explicit ValueError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Violated API contract (e.g. non-scalar loss passed to backward()).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Malformed input file. Carries the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, long byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    long offset;
};

// Filesystem-level failure (open/read/write).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace diffdepth
