#pragma once

#include <stdexcept>
#include <string>

namespace softctrl {

// Inverse dynamics cannot resolve the sign of the displacement when the
// relative heading reaches a quarter turn.
struct DegenerateTarget : std::runtime_error {
    explicit DegenerateTarget(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct InvariantViolation : std::runtime_error {
    explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SteppedAfterDone : std::runtime_error {
    explicit SteppedAfterDone(const std::string& what) : std::runtime_error(what) {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfRange : std::runtime_error {
    explicit OutOfRange(const std::string& what) : std::runtime_error(what) {}
};

struct NoForwardPass : std::runtime_error {
    explicit NoForwardPass(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace softctrl
