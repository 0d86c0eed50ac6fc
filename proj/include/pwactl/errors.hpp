#pragma once

#include <stdexcept>
#include <string>

namespace pwactl {

// Error taxonomy shared across the library. Every exception carries a
// human-readable message; a few carry partial results (see sim.hpp for
// DivergenceError, which keeps the trajectory computed so far).

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidSlab : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CoverageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateRegion : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoFeasibleOffsets : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SynthesisFailed : std::runtime_error {
    SynthesisFailed(const std::string& msg, std::string attempt_log)
        : std::runtime_error(msg), log(std::move(attempt_log)) {}
    std::string log;  // per-attempt failure record
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pwactl
