#pragma once

#include <stdexcept>
#include <string>

namespace roadobj {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input document (bad JSON, unknown tags, missing keys).
struct ParseError : Error {
    using Error::Error;
};

/// Structurally valid document violating a data invariant; the message
/// names the offending record.
struct ValidationError : Error {
    using Error::Error;
};

/// Infeasible or out-of-range configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Geometric input too degenerate to process (collinear point sets,
/// zero-area polygons, sliver masks).
struct DegenerateInput : Error {
    using Error::Error;
};

/// 3D point lies behind (or too close to) a camera.
struct BehindCamera : Error {
    using Error::Error;
};

/// Viewing rays too close to parallel for a stable triangulation.
struct InsufficientParallax : Error {
    using Error::Error;
};

/// Not enough usable views/points to initialize a shape.
struct InsufficientObservations : Error {
    using Error::Error;
};

/// Point set has no well-defined supporting plane.
struct DegeneratePlane : Error {
    using Error::Error;
};

/// Non-finite cost or Jacobian inside the solver; input data needs an audit.
struct NumericalFailure : Error {
    using Error::Error;
};

}  // namespace roadobj
