#pragma once

#include <stdexcept>
#include <string>

namespace mdc {

struct ChartDomainError : std::runtime_error {
    explicit ChartDomainError(const std::string& what) : std::runtime_error(what) {}
};

/// det J hit zero, or the Riccati flow blew up: the transport is not usable
/// at this scale (conjugate point or loss of d^2/2-concavity).
struct InadmissibleTransport : std::runtime_error {
    explicit InadmissibleTransport(const std::string& what) : std::runtime_error(what) {}
};

struct NoAdmissibleScale : std::runtime_error {
    explicit NoAdmissibleScale(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mdc
