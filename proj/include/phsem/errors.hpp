#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace phsem {

// Bad input data, configuration, or preconditions. CLI exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The estimator could not produce a result (non-convergence, rejection
// budget exhausted, starved states). CLI exit status 3.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or underflowing numerics. CLI exit status 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class BridgeBudgetError : public EstimationError {
 public:
  BridgeBudgetError(const std::string& what, std::size_t attempts)
      : EstimationError(what), attempts_(attempts) {}
  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

class StarvedStateError : public EstimationError {
 public:
  StarvedStateError(const std::string& what, int state)
      : EstimationError(what), state_(state) {}
  // 1-based state id with zero occupation time.
  int state() const { return state_; }

 private:
  int state_;
};

class StructuralError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace phsem
