#pragma once

#include <stdexcept>
#include <string>

namespace sep {

// Base class for every error the engine raises on an operation contract.
// Type construction with invalid arguments throws std::invalid_argument instead.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidBarPair : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct TemplateError : Error {
    using Error::Error;
};

// Transport failed in a way that a retry may fix (connection refused, 5xx, 429).
struct TransientBackendError : Error {
    using Error::Error;
};

struct BackendUnavailable : Error {
    using Error::Error;
};

struct MalformedBackendReply : Error {
    using Error::Error;
};

struct ScriptExhausted : Error {
    using Error::Error;
};

struct CandidateCoverageError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
};

struct EmptyCandidateError : Error {
    using Error::Error;
};

struct MissingReturnError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct UndefinedMetric : Error {
    using Error::Error;
};

struct InsufficientHistory : Error {
    using Error::Error;
};

struct InsufficientData : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

} // namespace sep
