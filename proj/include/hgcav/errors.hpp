#pragma once

#include <stdexcept>
#include <string>

namespace hgcav {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Resonator outside the stability range 0 <= xi1*xi2 <= 1.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Bad or inconsistent configuration (unknown mode id, bad parameter, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

class ScheduleError : public Error {
public:
    using Error::Error;
};

/// Atom sits on a node shared by every family member.
class UndefinedDecompositionError : public Error {
public:
    using Error::Error;
};

/// The record contains no detectable transit.
class NoTransitError : public Error {
public:
    using Error::Error;
};

class ZeroCouplingError : public Error {
public:
    using Error::Error;
};

/// Measured coupling magnitude exceeds what the mode can produce.
class InfeasibleMeasurementError : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelationError : public Error {
public:
    using Error::Error;
};

class InsufficientStructureError : public Error {
public:
    using Error::Error;
};

}  // namespace hgcav
