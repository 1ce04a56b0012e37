#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diffstruct {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported mesh input (parse failures, bad indices,
/// non-manifold or non-orientable connectivity, degenerate faces).
class MeshError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration, boundary conditions or stripe parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The reduced statics system could not be factored.
class SingularSystemError : public Error {
public:
    SingularSystemError(const std::string& what, int component)
        : Error(what), component_(component) {}

    /// Connected component lacking constraints, or -1 if unknown.
    int component() const { return component_; }

private:
    int component_;
};

/// Eigensolver failed to converge or produced pairs violating the residual contract.
class EigenSolveError : public Error {
public:
    EigenSolveError(const std::string& what, std::vector<double> residuals)
        : Error(what), residuals_(std::move(residuals)) {}

    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// Error raised by one stage of the precompute chain, tagged with the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

} // namespace diffstruct
