#pragma once

#include <stdexcept>
#include <string>

namespace barysid {

// Base of every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class SingularAtFrequency : public Error {
 public:
  SingularAtFrequency(double omega, const std::string& what)
      : Error(what), omega_(omega) {}
  double omega() const { return omega_; }

 private:
  double omega_;
};

class UnstableSystem : public Error {
 public:
  using Error::Error;
};

class NonzeroFeedthrough : public Error {
 public:
  using Error::Error;
};

class DuplicateFrequency : public Error {
 public:
  using Error::Error;
};

class SteadyStateTimeout : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class MaxIterations : public Error {
 public:
  using Error::Error;
};

class NonuniformSampling : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace barysid
