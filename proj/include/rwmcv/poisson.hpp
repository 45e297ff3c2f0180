#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "rwmcv/targets.hpp"

namespace rwmcv {

/// Speed constant of the limiting Langevin diffusion,
/// h(l) = 2 l^2 Phi(-l sqrt(J)/2).
double h_of_l(double l, double J);

struct LimitConstants {
  double J = 1.0;
  double l = 2.38;
  double h_l = 0.0;  // h(l), kept consistent with J and l

  static LimitConstants from(double J, double l) {
    return {J, l, h_of_l(l, J)};
  }
};

/// An evaluable solution f_hat of the limit-diffusion Poisson equation
///   (h(l)/2)(f_hat'' + (log rho)' f_hat') = rho(f) - f,
/// used as the control-variate generator. Three kinds:
///  - ClosedForm: the double-integral solution, tabulated on a fine grid
///    and restricted to the central quantile range of rho (linear
///    extension outside, where 1/rho would overflow);
///  - Grid: the 100-point finite-difference / pseudoinverse solution,
///    evaluated as the piecewise-linear interpolant of the node values;
///  - GaussianAnalytic: the linear map x -> 2/h0(l) * sum_j x_j Sigma_j1,
///    which takes the full state rather than a scalar.
class PoissonSolution {
 public:
  enum class Kind { ClosedForm, Grid, GaussianAnalytic };

  struct Meta {
    double h_l = 0.0;
    double rho_f = 0.0;
    double domain_lo = 0.0, domain_hi = 0.0;
    double fd_step = 1e-4;           // step hint for second-derivative FD
    std::vector<double> grid_nodes;  // Grid kind
    std::vector<double> grid_values;
    int effective_rank = -1;         // Grid kind: rank of the linear system
    bool ill_conditioned = false;
    Eigen::VectorXd cv_coefficients;  // GaussianAnalytic: gradient of f~
    double J0 = 0.0;                  // GaussianAnalytic
  };

  Kind kind() const { return kind_; }
  const Meta& meta() const { return meta_; }

  /// Scalar solutions (ClosedForm/Grid). Total on R: outside the solver
  /// domain the value continues linearly with the boundary derivative.
  double evaluate(double x) const;
  /// First derivative (ClosedForm/Grid only).
  double derivative(double x) const;
  /// State evaluation: GaussianAnalytic uses the full state; scalar kinds
  /// apply to coordinate 1.
  double evaluate_state(const Eigen::VectorXd& x) const;

  static PoissonSolution closed_form(std::function<double(double)> value,
                                     std::function<double(double)> deriv,
                                     Meta meta);
  static PoissonSolution grid(Meta meta);
  static PoissonSolution gaussian_analytic(Meta meta);

 private:
  PoissonSolution() = default;
  Kind kind_ = Kind::ClosedForm;
  Meta meta_;
  std::function<double(double)> value_;
  std::function<double(double)> deriv_;
};

/// The particular solution f_hat(x) = int_0^x 2/(h(l) rho(y)) *
/// int_{-inf}^y rho(z)(rho_f - f(z)) dz dy, computed by tabulating the
/// inner cumulative integral on a fine grid, splining it, and integrating
/// the resulting derivative outward from 0. rho_f is passed explicitly so
/// callers choose quadrature truth or a chain estimate.
PoissonSolution solve_closed_form(const ScalarDensity& density,
                                  const std::function<double(double)>& f,
                                  double rho_f, const LimitConstants& constants,
                                  int inner_nodes = 40001);

/// The numerical scheme for the same ODE: m equally spaced nodes over
/// [min(chain) - 3 l/sqrt(d), max(chain) + 3 l/sqrt(d)], symmetric
/// second/first differences inside (one-sided at the two boundary rows),
/// log rho differenced on the grid, minimum-norm least-squares solve
/// (singular values below 1e-10 * sigma_max dropped), piecewise-linear
/// interpolant of the solution. The system annihilates constants, so it is
/// rank deficient by design; the minimum-norm solution fixes the free
/// constant, which the control variate never sees.
PoissonSolution solve_grid(const std::function<double(double)>& log_rho,
                           const std::function<double(double)>& f,
                           double rho_f_hat,
                           const std::vector<double>& chain_coord1, double l,
                           int d, const LimitConstants& constants, int m = 100);

/// Analytic control variate for a Gaussian target with covariance Sigma:
/// f~(x) = 2/h0(l) * sum_j x_j Sigma_j1, with
/// J0 = Tr((Sigma^-1)_{2:d,2:d})/d and h0(l) = 2 l^2 Phi(-l sqrt(J0)/2).
/// Does not depend on the mean of the target. For d = 1 the trace block is
/// empty and J0 = 0.
PoissonSolution gaussian_cv(const Eigen::MatrixXd& sigma, double l, int d);

/// Limit generator applied to g at x: (h/2)(g'' + (log rho)' g'), with the
/// derivatives supplied analytically.
double generator_limit(const ScalarDensity& density,
                       const std::function<double(double)>& g_deriv,
                       const std::function<double(double)>& g_second,
                       const LimitConstants& constants, double x);

/// Same, with g'' and g' taken as central differences of g.
double generator_limit_fd(const ScalarDensity& density,
                          const std::function<double(double)>& g,
                          const LimitConstants& constants, double x,
                          double fd_step);

/// Same, for a solved f_hat: g' is the exposed derivative and g'' a central
/// difference of it (step meta().fd_step), so the residual check exercises
/// the numerically constructed derivative rather than the defining identity.
double generator_limit(const ScalarDensity& density,
                       const PoissonSolution& solution,
                       const LimitConstants& constants, double x);

/// Quantile table of a 1-D density, shared by the closed-form solver and
/// the residual checks: cumulative trapezoid CDF on a uniform grid over the
/// quadrature domain.
class DensityTable {
 public:
  DensityTable(const ScalarDensity& density, int nodes = 40001);
  double quantile(double p) const;
  double cdf(double x) const;

 private:
  std::vector<double> x_, cdf_;
};

}  // namespace rwmcv
