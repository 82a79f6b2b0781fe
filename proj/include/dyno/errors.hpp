#pragma once

#include <stdexcept>
#include <string>

namespace dyno {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Projection or back-projection requested at non-positive depth.
struct DegenerateProjection : Error {
  using Error::Error;
};

/// Pixel disparity too small for the closed-form depth recovery.
struct NoParallax : Error {
  using Error::Error;
};

/// Closed-form depth ops only accept pure-translation planar motions.
struct UnsupportedMotion : Error {
  using Error::Error;
};

/// Volume anchored behind the camera near plane.
struct DegenerateAnchor : Error {
  using Error::Error;
};

/// Residual search found no valid cell in any hypothesis.
struct NoEvidence : Error {
  using Error::Error;
};

/// Fusion called with an empty estimate list.
struct NoEstimates : Error {
  using Error::Error;
};

/// Recurrent refinement needs at least two frames.
struct InsufficientFrames : Error {
  using Error::Error;
};

struct InvalidSigma : Error {
  using Error::Error;
};

struct InvalidNoise : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct SchemaError : Error {
  using Error::Error;
};

struct MissingData : Error {
  using Error::Error;
};

}  // namespace dyno
