#pragma once

#include <stdexcept>
#include <string>

namespace homodyne {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid parameter set, file content, or run configuration.
class ConfigError : public Error {
    using Error::Error;
};

/// DC operating point would exceed the amplifier output swing.
class SaturationError : public Error {
    using Error::Error;
};

/// Requested frequency band lies outside the spectrum support.
class BandOutOfRange : public Error {
    using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
    using Error::Error;
};

/// Trace too short for the requested spectral estimate.
class InsufficientData : public Error {
    using Error::Error;
};

/// Nonlinear fit failed to converge from every starting point.
class FitDiverged : public Error {
    using Error::Error;
};

/// Response never falls to the requested level.
class NoCrossing : public Error {
    using Error::Error;
};

/// Regression input without enough independent variation.
class DegenerateInput : public Error {
    using Error::Error;
};

/// Total efficiency exceeds quantum efficiency.
class InconsistentEfficiencies : public Error {
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
    using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
    using Error::Error;
};

}  // namespace homodyne
