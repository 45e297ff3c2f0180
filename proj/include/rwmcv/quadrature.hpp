#pragma once

#include <functional>
#include <vector>

namespace rwmcv {

struct QuadratureResult {
  double value = 0.0;
  double error_bound = 0.0;
  int subdivisions = 0;
};

/// Adaptive Gauss-Kronrod (G7/K15) integration of f over [a, b] to absolute
/// tolerance tol. The interval with the largest error estimate is bisected
/// until the summed error bound is below tol. Throws QuadratureNonConvergence
/// (carrying the best estimate) once max_subdivisions is exhausted.
///
/// initial_splits > 1 seeds the worklist with that many equal subintervals;
/// useful for integrands with interior kinks and for recomputing a constant
/// on a genuinely different grid.
QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double tol,
                           int max_subdivisions = 4000,
                           int initial_splits = 2);

}  // namespace rwmcv
