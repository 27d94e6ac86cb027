#pragma once

#include <stdexcept>
#include <string>

namespace oocnmf {

/// Contract violation: mismatched shapes, bad windows, invalid configs.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Data violates a required invariant (negative entry, NaN factor, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// File format / filesystem failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Collective communication failures (timeout, mismatch, poisoned group).
class CommError : public std::runtime_error {
public:
    explicit CommError(const std::string& what) : std::runtime_error(what) {}
};

/// Out-of-core store failures (budget exceeded, double release, ...).
class StoreError : public std::runtime_error {
public:
    explicit StoreError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace oocnmf
