#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "rwmcv/poisson.hpp"
#include "rwmcv/targets.hpp"

namespace rwmcv {

/// Default sluggish sequence a_d = sqrt(2 log d); a_d -> inf with
/// a_d / sqrt(log d) = sqrt(2) bounded.
double sluggish_default(int d);

/// Constants defining the concentration sets A_d: the 1-D set
/// A = { |log(rho)''| < (log(rho)')^2,  1/c_A < |log(rho)'| < c_A }
/// together with the four empirical-average thresholds.
struct AdConstants {
  double c_A = 0.0;
  std::vector<std::pair<double, double>> set_A;  // disjoint open intervals
  double rho_A = 0.0;
  double exp_moment = 0.0;  // rho(e^|x|)
  double J = 0.0;
  double c3 = 0.0;  // sqrt(3 rho(((log rho)'^2 - J)^2))
  double c4 = 0.0;  // sqrt(3 rho((log rho)'' + J)^2)
  std::shared_ptr<const ScalarDensity> density;
};

/// Scans the density's domain for the admissible set, picks the smallest
/// grid c_A achieving rho(A) >= 0.05 (falls back to the largest rho(A) if
/// none reaches the threshold), and computes the condition constants by
/// quadrature. Throws EmptyA if every c_A in the grid gives rho(A) = 0.
AdConstants compute_ad_constants(const ScalarDensity& density,
                                 const std::vector<double>& c_A_grid,
                                 double quad_tol = 1e-10,
                                 int scan_points = 10000,
                                 int initial_splits = 2);

struct AdMembership {
  bool in_Ad = false;
  std::array<bool, 4> cond{};  // the four conditions on coordinates 2..d
};

/// Evaluates the four A_d conditions over coordinates 2..d (coordinate 1 is
/// unconstrained). Strict inequalities as displayed; conditions 3 and 4
/// carry an absolute 1e-8 * (1 + |J|) tolerance because for targets where
/// log(rho)'' is constant (exact Gaussians) both sides vanish together and
/// the strict comparison would otherwise empty A_d.
AdMembership ad_membership(const AdConstants& consts, const Eigen::VectorXd& x,
                           double a_d);

struct GeneratorEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Plain-MC estimate of the RWM generator applied to g (a function of the
/// first coordinate) at x: d * E[(g(Y_1) - g(x_1)) (1 ^ rho_d(Y)/rho_d(x))]
/// over n_inner proposals, with its standard error.
GeneratorEstimate generator_chain_mc(const TargetDistribution& target,
                                     const std::function<double(double)>& g,
                                     const Eigen::VectorXd& x, double l,
                                     int n_inner, RngStream& rng);

/// A scalar function with the derivatives the limit generator needs.
struct SmoothFn {
  std::function<double(double)> value, deriv, second;

  static SmoothFn coordinate();          // g(x) = x
  static SmoothFn constant(double c);
  static SmoothFn scaled_coordinate(double a);  // g(x) = a x
  /// Derivatives from a solved f_hat (exposed derivative + one FD level).
  static SmoothFn from_solution(std::shared_ptr<const PoissonSolution> sol);
};

struct GapRow {
  int d = 0;
  double mean_abs_gap = 0.0;
  double q95_abs_gap = 0.0;
  int n_points = 0;
  int n_inner = 0;
  double mean_inner_se = 0.0;  // reported so the gap is interpretable
};

struct GeneratorGapReport {
  std::vector<GapRow> rows;
};

/// For each d in d_grid: samples n_points stationary states of the product
/// target, evaluates |G g (x_1) - G_d g (x)| with G_d estimated by
/// generator_chain_mc, and aggregates mean and 95th percentile (the bound
/// behind this carries an e^|x_1| factor, so a heavy right tail is
/// expected). When `condition` is given, states are resampled until they
/// fall in A_d (off by default).
GeneratorGapReport generator_gap_study(
    const ScalarDensity& rho, const SmoothFn& g,
    const std::vector<int>& d_grid, int n_points, int n_inner,
    std::uint64_t seed, unsigned workers = 1,
    const AdConstants* condition = nullptr, double l_override = 0.0);

}  // namespace rwmcv
