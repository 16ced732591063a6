#pragma once

#include <stdexcept>
#include <string>

namespace molo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : Error { using Error::Error; };
struct GeometryError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };

// Raised when the augmented system is singular or its condition estimate
// exceeds the guard.
struct SolverError : Error { using Error::Error; };

// Raised when an FD stencil point is unusable (inside the surface, on an edge).
struct FdGeometryError : GeometryError { using GeometryError::GeometryError; };

// Numerical abort of the iteration (degenerate surface, Marussi violation).
struct NumericalAbort : Error { using Error::Error; };

}  // namespace molo
