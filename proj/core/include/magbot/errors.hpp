#pragma once

#include <stdexcept>
#include <string>

namespace magbot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidSpecError : public Error {
public:
    using Error::Error;
};

/// Field or force evaluated at zero separation from a point dipole.
class SingularityError : public Error {
public:
    using Error::Error;
};

class InvalidConfigurationError : public Error {
public:
    using Error::Error;
};

class InfeasibleTargetError : public Error {
public:
    InfeasibleTargetError(const std::string& what, std::string limiting_coil)
        : Error(what), limiting_coil_(std::move(limiting_coil)) {}
    const std::string& limiting_coil() const noexcept { return limiting_coil_; }

private:
    std::string limiting_coil_;
};

class SaturationError : public Error {
public:
    using Error::Error;
};

class SimulationDivergedError : public Error {
public:
    SimulationDivergedError(const std::string& what, int first, int second)
        : Error(what), first_(first), second_(second) {}
    int first() const noexcept { return first_; }
    int second() const noexcept { return second_; }

private:
    int first_;
    int second_;
};

class CannotWalkError : public Error {
public:
    using Error::Error;
};

class InvalidDirectionError : public Error {
public:
    using Error::Error;
};

class NoFreeSpaceError : public Error {
public:
    using Error::Error;
};

class InvalidEndpointError : public Error {
public:
    using Error::Error;
};

class UnreachableGoalError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; carries the offending location when known.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace magbot
