#pragma once

#include <stdexcept>
#include <string>

namespace cheeger {

/// Base class for all errors raised by the lab.
class LabError : public std::runtime_error {
public:
    explicit LabError(const std::string& what) : std::runtime_error(what) {}
};

/// A shape or compact set does not fit inside the grid with the required margin.
class BoundsError : public LabError {
public:
    using LabError::LabError;
};

/// Two grid objects that must share a GridSpec do not.
class SpecMismatchError : public LabError {
public:
    using LabError::LabError;
};

/// Grid resolution too low for the requested computation.
class ResolutionError : public LabError {
public:
    using LabError::LabError;
};

/// Domain has zero volume or is otherwise unusable.
class DegenerateDomainError : public LabError {
public:
    using LabError::LabError;
};

/// Iterative solver failed to reach its tolerance. Carries the last residuals.
class ConvergenceError : public LabError {
public:
    ConvergenceError(const std::string& what, double gap, long iterations)
        : LabError(what), duality_gap(gap), iterations(iterations) {}

    double duality_gap = 0.0;
    long iterations = 0;
};

/// Fixed-point inversion of a perturbation map did not converge.
class InversionError : public LabError {
public:
    using LabError::LabError;
};

/// A perturbation family violates its schedule invariants.
class FamilyError : public LabError {
public:
    using LabError::LabError;
};

/// All regression samples sit below the solver noise floor.
class InsufficientSignalError : public LabError {
public:
    using LabError::LabError;
};

/// Invalid experiment or solver configuration.
class ConfigError : public LabError {
public:
    using LabError::LabError;
};

} // namespace cheeger
