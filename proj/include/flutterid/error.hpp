#pragma once

#include <stdexcept>
#include <string>

namespace flutterid {

/// Bad input: violated precondition, malformed file, inconsistent config.
/// The CLI maps it to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure could not produce a meaningful answer
/// (rank deficiency, singular pencil, optimizer failure). Exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Least-squares block lost rank; usually the model order is too high
/// for the information in the data.
class RankDeficientError : public NumericalError {
public:
    explicit RankDeficientError(const std::string& what) : NumericalError(what) {}
};

/// The relaxed vector-fitting constant collapsed to zero.
class DegenerateRelaxationError : public NumericalError {
public:
    explicit DegenerateRelaxationError(const std::string& what) : NumericalError(what) {}
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ValidationError(message);
}

} // namespace flutterid
