#pragma once

#include <stdexcept>
#include <string>

namespace omt {

/// Base class of every error raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class NonSPDCoefficient : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class UnsupportedForDR : public Error {
 public:
  using Error::Error;
};

class EmptyFeasibleSet : public Error {
 public:
  using Error::Error;
};

class ProjectionFailure : public Error {
 public:
  using Error::Error;
};

class InfeasibleKinetic : public Error {
 public:
  using Error::Error;
};

class InvalidParameters : public Error {
 public:
  using Error::Error;
};

class DivergenceDetected : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace omt
