#pragma once

#include <stdexcept>
#include <string>

namespace relulab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Thrown when adaptive refinement cannot reach the requested tolerance.
class ToleranceNotMet : public Error {
public:
    using Error::Error;
};

class SamplerStall : public Error {
public:
    using Error::Error;
};

class NonFiniteGradient : public Error {
public:
    using Error::Error;
};

/// An experiment's hypotheses do not hold for the given problem.
class PreconditionFailed : public Error {
public:
    using Error::Error;
};

/// Configuration problem. `path()` names the offending JSON location, e.g. "$.optimizer.kind".
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace relulab
