#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rwmcv/rng.hpp"

namespace rwmcv {

/// A strictly positive density on R with log-derivatives up to order 4 and
/// an exact seeded sampler. The theory behind the control variates assumes
/// log(rho) is smooth with sub-exponentially growing derivatives and that
/// rho has super-exponential tails (x/|x| * (log rho)'(x) -> -inf); this is
/// a documented requirement on constructors, not a runtime check. All
/// shipped densities (Gaussian mixtures) satisfy it.
///
/// quadrature_domain [x_lo, x_hi] is chosen per density so the truncated
/// tail mass is below 1e-12.
class ScalarDensity {
 public:
  using Fn = std::function<double(double)>;
  using Sampler = std::function<double(RngStream&)>;

  /// Derivative slots may be empty; missing orders fall back to symmetric
  /// finite differences of the previous order, step max(1e-5, 1e-5*|x|).
  ScalarDensity(std::string name, Fn log_rho, std::array<Fn, 4> d_log_rho,
                Sampler sampler, double x_lo, double x_hi);

  double log_rho(double x) const { return log_rho_(x); }
  double rho(double x) const { return std::exp(log_rho_(x)); }
  /// k-th derivative of log(rho), k in 1..4.
  double d_log_rho(int k, double x) const;
  double sample(RngStream& rng) const { return sampler_(rng); }

  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }
  const std::string& name() const { return name_; }

  static ScalarDensity standard_normal();
  static ScalarDensity normal(double mu, double sigma);

 private:
  std::string name_;
  Fn log_rho_;
  std::array<Fn, 4> d_log_rho_;
  Sampler sampler_;
  double x_lo_, x_hi_;
};

/// Mixture of 1-D Gaussians; realizes the ScalarDensity interface with
/// analytic log-derivatives (stable responsibility-weighted Hermite sums).
class GaussianMixture1D {
 public:
  GaussianMixture1D(std::vector<double> weights, std::vector<double> means,
                    std::vector<double> std_devs);

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& std_devs() const { return std_devs_; }

  ScalarDensity to_density(std::string name = "gaussian_mixture") const;

 private:
  std::vector<double> weights_, means_, std_devs_;
};

/// d-dimensional target: either a product of a 1-D density or a mixture of
/// d-dimensional Gaussians with a shared covariance. Immutable and safe to
/// share across threads; sampling takes an explicit stream.
class TargetDistribution {
 public:
  enum class Kind { Product, MvGaussianMixture };

  static TargetDistribution product(ScalarDensity rho, int d);
  static TargetDistribution mv_gaussian_mixture(
      std::vector<double> weights, std::vector<Eigen::VectorXd> means,
      Eigen::MatrixXd sigma);
  /// The two-mode benchmark target: mixture of N(-mu, Sigma) and
  /// N(+mu, Sigma) with mu = (h/2, 0, ..., 0), Sigma built spectrally from
  /// eigenvector (1,...,1)/sqrt(d) with eigenvalue lambda_max and all other
  /// eigenvalues 1.
  static TargetDistribution bimodal_gaussian(int d, double h,
                                             double lambda_max = 25.0);

  Kind kind() const { return kind_; }
  int dimension() const { return d_; }
  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(RngStream& rng) const;

  /// Product kind only.
  const ScalarDensity& scalar_density() const;
  /// MvGaussianMixture kind only.
  const Eigen::MatrixXd& covariance() const;
  const Eigen::MatrixXd& covariance_inverse() const;
  const std::vector<Eigen::VectorXd>& component_means() const;
  const std::vector<double>& component_weights() const;

 private:
  TargetDistribution() = default;

  Kind kind_ = Kind::Product;
  int d_ = 1;
  std::shared_ptr<const ScalarDensity> rho_;  // Product

  std::vector<double> weights_;               // MvGaussianMixture
  std::vector<Eigen::VectorXd> means_;
  Eigen::MatrixXd sigma_, sigma_inv_, chol_lower_;
  double log_det_sigma_ = 0.0;
  // O(d) path for Sigma = I + c v v^T (the benchmark covariance); avoids the
  // d x d matvec per density evaluation.
  bool spiked_ = false;
  double spike_inv_coef_ = 0.0;   // Sigma^-1 = I + spike_inv_coef v v^T
  double spike_chol_coef_ = 0.0;  // sampling: z + spike_chol_coef (v.z) v
  Eigen::VectorXd spike_v_;
};

/// Adaptive quadrature of g against the density over its quadrature domain
/// to absolute tolerance tol. The domain is split at 0 when interior, which
/// also serves integrands with a kink there (e.g. e^|x|).
///
/// initial_splits can be raised to recompute a constant on a genuinely
/// different subdivision when cross-checking quadrature self-consistency.
double expectation(const ScalarDensity& density,
                   const std::function<double(double)>& g, double tol = 1e-10,
                   int initial_splits = 2);

/// J = rho((log rho)'^2), the Fisher-type constant of the limit diffusion.
double fisher_J(const ScalarDensity& density, double tol = 1e-10);

/// n exact IID stationary draws, rows of the returned matrix.
Eigen::MatrixXd sample_stationary(const TargetDistribution& target, int n,
                                  RngStream& rng);

}  // namespace rwmcv
