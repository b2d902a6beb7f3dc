#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes of tensors or parameter sets do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid hyper-parameters or experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Bad caller input (empty strings, mismatched filter widths, ...).
class InputError : public Error {
public:
    using Error::Error;
};

class DeterminismError : public Error {
public:
    using Error::Error;
};

// All candidate distances equal, so similarities cannot be standardized.
class DegenerateLinkageError : public Error {
public:
    using Error::Error;
};

// Requested privacy bound lies outside the achievable window.
class InfeasibleBudgetError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

// Stored indices point outside the data they refer to.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class EmptyLinkageError : public Error {
public:
    using Error::Error;
};

// Cross-party message that the protocol does not allow.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Wraps an error raised inside one experiment stage with the stage name.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace fedsim
