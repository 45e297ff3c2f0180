#pragma once

#include <stdexcept>
#include <string>

namespace rwmcv {

/// Adaptive quadrature ran out of subdivision budget. Carries the best
/// estimate and the error bound at the point of giving up.
class QuadratureNonConvergence : public std::runtime_error {
 public:
  QuadratureNonConvergence(const std::string& what, double best, double err)
      : std::runtime_error(what), best_estimate(best), error_bound(err) {}
  double best_estimate;
  double error_bound;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateDenominator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooFewBatches : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No c_A in the scanned grid produced a set A with rho(A) > 0.
class EmptyA : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rwmcv
