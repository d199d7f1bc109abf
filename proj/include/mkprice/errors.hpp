#pragma once

#include <stdexcept>
#include <string>

namespace mkprice {

/// Rejected input: malformed data, violated preconditions, dimension
/// mismatches, bad configuration. Maps to CLI exit code 2.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative solver hit its iteration cap. Carries the last iterate so
/// callers can inspect how far it got. Maps to CLI exit code 1.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_iterate)
        : std::runtime_error(what), last_iterate_(last_iterate) {}

    double last_iterate() const noexcept { return last_iterate_; }

private:
    double last_iterate_;
};

// Throws InputError with `message` when `condition` is false.
void require(bool condition, const std::string& message);

}  // namespace mkprice
