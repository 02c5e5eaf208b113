#pragma once

#include <stdexcept>
#include <string>

namespace deepcore {

// Base class for all library failures so callers can attribute errors
// to a pipeline stage and map them to distinct exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/size mismatch between an input and what a network or metric expects.
struct DimensionError : Error {
  using Error::Error;
};

// A file exists but its contents do not match the expected format/schema.
struct ParseError : Error {
  using Error::Error;
};

// Missing or unreadable file.
struct IoError : Error {
  using Error::Error;
};

// Loss went non-finite during SGD.
struct TrainingDiverged : Error {
  using Error::Error;
};

// All candidate decision hyperplanes have zero gradient; no minimal
// perturbation direction exists at this point.
struct DegenerateGeometry : Error {
  using Error::Error;
};

}  // namespace deepcore
