// error.hpp: exception hierarchy shared by all ddlab modules

#pragma once

#include <stdexcept>
#include <string>

namespace ddlab {

// Category of a failure. The CLI maps these onto exit codes.
enum class ErrorKind {
    invalid_input,      // malformed or inconsistent arguments
    incompatible,       // dimension / mode-count mismatch between objects
    resource_limit,     // requested size exceeds the configured ceiling
    invalid_interval,   // s > t for a propagator request
    precondition,       // caller skipped a required check
    conditioning,       // numerical step lost unitarity
    not_converged,      // quadrature or optimizer gave up
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace ddlab
