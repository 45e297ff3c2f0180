#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace rwmcv {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438187;

/// Standard normal density.
inline double normal_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF via erfc; accurate to ~1e-16 relative over the
/// range used here.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Natural cubic spline on a strictly increasing node set. Evaluation
/// outside the nodes extends the boundary cubic.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;

 private:
  std::size_t interval(double x) const;
  std::vector<double> x_, y_, m_;  // m_: second derivatives at nodes
};

/// Maximizes a unimodal function on [lo, hi] by golden-section search.
double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol = 1e-12);

/// p-th percentile (nearest-rank) of a copy of the data.
double percentile(std::vector<double> values, double p);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);

/// Runs fn(0..n-1) on a pool of `workers` threads. Tasks must be pure up
/// to their own output slot; the first exception is rethrown after join.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace rwmcv
