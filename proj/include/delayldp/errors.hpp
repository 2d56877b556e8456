#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace delayldp {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that is malformed or inconsistent (usage-level failure).
class InputError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public InputError {
public:
    using InputError::InputError;
};

class RangeError : public InputError {
public:
    using InputError::InputError;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

/// A numerical procedure failed (blow-up, divergence, non-convergence, fit).
class NumericalError : public Error {
public:
    using Error::Error;
};

class ModelEvaluationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class BlowUpError : public NumericalError {
public:
    BlowUpError(const std::string& what, std::size_t step)
        : NumericalError(what), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DivergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TruncationActiveError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace delayldp
