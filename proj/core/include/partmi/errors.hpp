#pragma once

#include <stdexcept>
#include <string>

namespace partmi {

/// Malformed or out-of-contract input (bad CSV, invalid partition string,
/// inconsistent dimensions). CLI exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// A deliberate budget guard tripped (exhaustive enumeration too large,
/// cache bound exceeded in a mode that forbids eviction). CLI exit code 3.
class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside a score evaluation (non-positive-definite
/// matrix, gamma argument out of domain). Carries the offending block so
/// samplers can reject the candidate explicitly. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
    NumericalError(const std::string& what, std::string block)
        : std::runtime_error(what + " [block " + block + "]"), block_(std::move(block)) {}

    /// Display string of the block that failed, empty if not block-specific.
    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

} // namespace partmi
