#pragma once

#include <stdexcept>
#include <string>

namespace earlywarn {

/// Base class for every error raised by the library.
///
/// `is_validation()` separates bad input (malformed files, out-of-range
/// parameters, unknown names) from runtime failures such as a solver that
/// does not converge. The command-line front end maps the former to exit
/// code 2 and the latter to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, bool validation = false)
        : std::runtime_error(what), validation_(validation) {}

    bool is_validation() const noexcept { return validation_; }

private:
    bool validation_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what, true) {}
};

class AlignmentError : public Error {
public:
    explicit AlignmentError(const std::string& what) : Error(what, true) {}
};

class DuplicateWeekError : public Error {
public:
    explicit DuplicateWeekError(const std::string& what) : Error(what, true) {}
};

class MissingDataError : public Error {
public:
    explicit MissingDataError(const std::string& what) : Error(what, true) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what, true) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, true) {}
};

class EstimationError : public Error {
public:
    explicit EstimationError(const std::string& what) : Error(what) {}
};

/// Secant solve ran out of iterations; carries the last bracket.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double lo, double hi)
        : Error(what), lo_(lo), hi_(hi) {}

    double bracket_lo() const noexcept { return lo_; }
    double bracket_hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

class CalibrationError : public Error {
public:
    explicit CalibrationError(const std::string& what) : Error(what) {}
};

}  // namespace earlywarn
