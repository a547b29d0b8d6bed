#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zfuse {

/// Base exception for all library failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// I/O failures, corrupt or inconsistent files.
class IoError : public Error {
public:
    using Error::Error;
};

/// Violated preconditions: mismatched dimensions, invalid parameters, short halos.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Non-finite data reaching the solver.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Wraps an error with the slice index it occurred at, keeping the original type's message.
class SliceError : public Error {
public:
    SliceError(std::size_t z, const std::string& what)
        : Error("slice " + std::to_string(z) + ": " + what), slice_(z) {}
    [[nodiscard]] std::size_t slice() const noexcept { return slice_; }

private:
    std::size_t slice_;
};

}  // namespace zfuse
