#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stegozoo {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bit-region width outside the legal range for its kind, or a write into a
// region that does not support writes.
class RegionError : public Error {
public:
    using Error::Error;
};

// Payload does not fit the carrier capacity n_W * X.
class CapacityError : public Error {
public:
    CapacityError(std::size_t requested_bits, std::size_t capacity_bits)
        : Error("payload of " + std::to_string(requested_bits) +
                " bits exceeds carrier capacity of " + std::to_string(capacity_bits) + " bits"),
          requested(requested_bits),
          capacity(capacity_bits) {}
    std::size_t requested;
    std::size_t capacity;
};

// Tensor/architecture shape inconsistency.
class ShapeError : public Error {
public:
    using Error::Error;
};

// On-disk format violation; carries the byte offset where parsing stopped
// when one is known.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(what), offset(0) {}
    FormatError(const std::string& what, std::uint64_t byte_offset)
        : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::uint64_t offset;
};

// Non-finite value where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Bad user-facing configuration: CLI flags, manifests, hyperparameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace stegozoo
