#pragma once

#include <stdexcept>
#include <string>

namespace dlqr {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// rho(M) >= 1 where a Schur matrix was required.
class SpectralPreconditionError : public Error {
 public:
  using Error::Error;
};

class DefinitenessError : public Error {
 public:
  using Error::Error;
};

// A standing assumption (stabilizability, positive-definite weights) fails.
class AssumptionError : public Error {
 public:
  using Error::Error;
};

// A computed object failed its own a posteriori invariant check.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class SynthesisInfeasibleError : public Error {
 public:
  SynthesisInfeasibleError(const std::string& what, std::string solver_status)
      : Error(what), solver_status_(std::move(solver_status)) {}
  const std::string& solver_status() const { return solver_status_; }

 private:
  std::string solver_status_;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class CertificateError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data violates an operation's input contract.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace dlqr
