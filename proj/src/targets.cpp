#include "rwmcv/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rwmcv/errors.hpp"
#include "rwmcv/numerics.hpp"
#include "rwmcv/quadrature.hpp"

namespace rwmcv {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640561764;

// Probabilists' Hermite polynomials He_0..He_4.
double hermite(int k, double t) {
  switch (k) {
    case 0: return 1.0;
    case 1: return t;
    case 2: return t * t - 1.0;
    case 3: return t * (t * t - 3.0);
    default: {
      const double t2 = t * t;
      return t2 * t2 - 6.0 * t2 + 3.0;
    }
  }
}

}  // namespace

ScalarDensity::ScalarDensity(std::string name, Fn log_rho,
                             std::array<Fn, 4> d_log_rho, Sampler sampler,
                             double x_lo, double x_hi)
    : name_(std::move(name)),
      log_rho_(std::move(log_rho)),
      d_log_rho_(std::move(d_log_rho)),
      sampler_(std::move(sampler)),
      x_lo_(x_lo),
      x_hi_(x_hi) {
  if (!(x_lo_ < x_hi_))
    throw std::invalid_argument("ScalarDensity: empty quadrature domain");
}

double ScalarDensity::d_log_rho(int k, double x) const {
  if (k < 1 || k > 4) throw std::invalid_argument("d_log_rho: k must be 1..4");
  if (d_log_rho_[k - 1]) return d_log_rho_[k - 1](x);
  // Finite-difference fallback on the previous order.
  const double h = std::max(1e-5, 1e-5 * std::abs(x));
  const auto lower = [&](double y) {
    return k == 1 ? log_rho_(y) : d_log_rho(k - 1, y);
  };
  return (lower(x + h) - lower(x - h)) / (2.0 * h);
}

ScalarDensity ScalarDensity::standard_normal() { return normal(0.0, 1.0); }

ScalarDensity ScalarDensity::normal(double mu, double sigma) {
  return GaussianMixture1D({1.0}, {mu}, {sigma}).to_density("normal");
}

GaussianMixture1D::GaussianMixture1D(std::vector<double> weights,
                                     std::vector<double> means,
                                     std::vector<double> std_devs)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      std_devs_(std::move(std_devs)) {
  const std::size_t k = weights_.size();
  if (k == 0 || means_.size() != k || std_devs_.size() != k)
    throw std::invalid_argument("GaussianMixture1D: size mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must sum to 1");
  for (double s : std_devs_)
    if (!(s > 0.0)) throw std::invalid_argument("mixture: std_dev must be > 0");
}

ScalarDensity GaussianMixture1D::to_density(std::string name) const {
  const auto means = means_;
  const auto sigmas = std_devs_;
  const std::size_t k = weights_.size();
  // Per-component additive constant log(w_i) - log(sigma_i) - log sqrt(2pi).
  std::vector<double> consts(k);
  for (std::size_t i = 0; i < k; ++i)
    consts[i] = std::log(weights_[i]) - std::log(sigmas[i]) - kLogSqrt2Pi;

  // Two-pass log-sum-exp, no per-call allocation; this sits on the hot path
  // of every chain step and inner-MC proposal.
  auto log_rho = [consts, means, sigmas, k](double x) {
    if (k == 1) {
      const double t = (x - means[0]) / sigmas[0];
      return consts[0] - 0.5 * t * t;
    }
    double amax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double t = (x - means[i]) / sigmas[i];
      amax = std::max(amax, consts[i] - 0.5 * t * t);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double t = (x - means[i]) / sigmas[i];
      s += std::exp(consts[i] - 0.5 * t * t - amax);
    }
    return amax + std::log(s);
  };
  // D_j = rho^(j)/rho = sum_i r_i (-1/sigma_i)^j He_j(t_i), r_i the
  // responsibility of component i at x.
  auto density_ratios = [consts, means, sigmas, k](double x,
                                                   std::array<double, 5>& d) {
    double amax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double t = (x - means[i]) / sigmas[i];
      amax = std::max(amax, consts[i] - 0.5 * t * t);
    }
    double norm = 0.0;
    d.fill(0.0);
    d[0] = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double t = (x - means[i]) / sigmas[i];
      const double ri = std::exp(consts[i] - 0.5 * t * t - amax);
      norm += ri;
      double scale = 1.0;
      for (int j = 1; j <= 4; ++j) {
        scale *= -1.0 / sigmas[i];
        d[j] += ri * scale * hermite(j, t);
      }
    }
    for (int j = 1; j <= 4; ++j) d[j] /= norm;
  };
  const auto weights = weights_;

  std::array<ScalarDensity::Fn, 4> derivs;
  derivs[0] = [density_ratios](double x) {
    std::array<double, 5> d;
    density_ratios(x, d);
    return d[1];
  };
  derivs[1] = [density_ratios](double x) {
    std::array<double, 5> d;
    density_ratios(x, d);
    return d[2] - d[1] * d[1];
  };
  derivs[2] = [density_ratios](double x) {
    std::array<double, 5> d;
    density_ratios(x, d);
    return d[3] - 3.0 * d[2] * d[1] + 2.0 * d[1] * d[1] * d[1];
  };
  derivs[3] = [density_ratios](double x) {
    std::array<double, 5> d;
    density_ratios(x, d);
    const double d1 = d[1];
    return d[4] - 4.0 * d[3] * d1 - 3.0 * d[2] * d[2] +
           12.0 * d[2] * d1 * d1 - 6.0 * d1 * d1 * d1 * d1;
  };

  auto sampler = [weights, means, sigmas, k](RngStream& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = k - 1;
    for (std::size_t i = 0; i < k; ++i) {
      cum += weights[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }
    return means[pick] + sigmas[pick] * rng.normal();
  };

  // 10 sigma covers tail mass ~8e-24 per component, far below the 1e-12
  // budget, and keeps exp-weighted moments accurate too.
  double lo = means[0] - 10.0 * sigmas[0];
  double hi = means[0] + 10.0 * sigmas[0];
  for (std::size_t i = 1; i < k; ++i) {
    lo = std::min(lo, means[i] - 10.0 * sigmas[i]);
    hi = std::max(hi, means[i] + 10.0 * sigmas[i]);
  }

  return ScalarDensity(std::move(name), log_rho, derivs, sampler, lo, hi);
}

TargetDistribution TargetDistribution::product(ScalarDensity rho, int d) {
  if (d < 1) throw std::invalid_argument("product target: d must be >= 1");
  TargetDistribution t;
  t.kind_ = Kind::Product;
  t.d_ = d;
  t.rho_ = std::make_shared<const ScalarDensity>(std::move(rho));
  return t;
}

TargetDistribution TargetDistribution::mv_gaussian_mixture(
    std::vector<double> weights, std::vector<Eigen::VectorXd> means,
    Eigen::MatrixXd sigma) {
  const std::size_t k = weights.size();
  if (k == 0 || means.size() != k)
    throw std::invalid_argument("mv mixture: size mismatch");
  if (k > 8)
    throw std::invalid_argument("mv mixture: at most 8 components supported");
  const int d = static_cast<int>(means[0].size());
  for (const auto& m : means)
    if (m.size() != d) throw std::invalid_argument("mv mixture: mean dims");
  if (sigma.rows() != d || sigma.cols() != d)
    throw std::invalid_argument("mv mixture: sigma dims");
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("mv mixture: weights must sum to 1");

  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("mv mixture: covariance not SPD");

  TargetDistribution t;
  t.kind_ = Kind::MvGaussianMixture;
  t.d_ = d;
  t.weights_ = std::move(weights);
  t.means_ = std::move(means);
  t.sigma_ = std::move(sigma);
  t.chol_lower_ = llt.matrixL();
  t.sigma_inv_ = llt.solve(Eigen::MatrixXd::Identity(d, d));
  t.log_det_sigma_ = 0.0;
  for (int i = 0; i < d; ++i)
    t.log_det_sigma_ += 2.0 * std::log(t.chol_lower_(i, i));
  return t;
}

TargetDistribution TargetDistribution::bimodal_gaussian(int d, double h,
                                                        double lambda_max) {
  if (d < 1) throw std::invalid_argument("bimodal_gaussian: d must be >= 1");
  if (h < 0.0) throw std::invalid_argument("bimodal_gaussian: h must be >= 0");
  // Sigma = I + (lambda-1) v v^T with v the unit all-ones vector.
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(
      d, d, (lambda_max - 1.0) / static_cast<double>(d));
  sigma.diagonal().array() += 1.0;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  mu(0) = 0.5 * h;
  TargetDistribution t =
      mv_gaussian_mixture({0.5, 0.5}, {-mu, mu}, std::move(sigma));
  t.spiked_ = true;
  t.spike_v_ = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
  t.spike_inv_coef_ = 1.0 / lambda_max - 1.0;
  t.spike_chol_coef_ = std::sqrt(lambda_max) - 1.0;
  return t;
}

double TargetDistribution::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != d_) throw std::invalid_argument("log_density: dim mismatch");
  if (kind_ == Kind::Product) {
    double s = 0.0;
    for (int i = 0; i < d_; ++i) s += rho_->log_rho(x(i));
    return s;
  }
  const double log_norm =
      -0.5 * (d_ * std::log(2.0 * kPi) + log_det_sigma_);
  const std::size_t K = weights_.size();
  double a[8];  // mixtures here are tiny; K is validated small
  double amax = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < K; ++c) {
    double q;
    if (spiked_) {
      double norm2 = 0.0, dot_v = 0.0;
      const Eigen::VectorXd& mu = means_[c];
      for (int i = 0; i < d_; ++i) {
        const double yi = x(i) - mu(i);
        norm2 += yi * yi;
        dot_v += yi * spike_v_(i);
      }
      q = norm2 + spike_inv_coef_ * dot_v * dot_v;
    } else {
      const Eigen::VectorXd y = x - means_[c];
      q = y.dot(sigma_inv_ * y);
    }
    a[c] = std::log(weights_[c]) + log_norm - 0.5 * q;
    amax = std::max(amax, a[c]);
  }
  double s = 0.0;
  for (std::size_t c = 0; c < K; ++c) s += std::exp(a[c] - amax);
  return amax + std::log(s);
}

Eigen::VectorXd TargetDistribution::sample(RngStream& rng) const {
  Eigen::VectorXd x(d_);
  if (kind_ == Kind::Product) {
    for (int i = 0; i < d_; ++i) x(i) = rho_->sample(rng);
    return x;
  }
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t pick = weights_.size() - 1;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    cum += weights_[c];
    if (u < cum) {
      pick = c;
      break;
    }
  }
  Eigen::VectorXd z(d_);
  for (int i = 0; i < d_; ++i) z(i) = rng.normal();
  if (spiked_) {
    const double dot_v = spike_v_.dot(z);
    x = means_[pick] + z + (spike_chol_coef_ * dot_v) * spike_v_;
  } else {
    x = means_[pick] + chol_lower_ * z;
  }
  return x;
}

const ScalarDensity& TargetDistribution::scalar_density() const {
  if (kind_ != Kind::Product)
    throw std::logic_error("scalar_density: not a product target");
  return *rho_;
}

const Eigen::MatrixXd& TargetDistribution::covariance() const {
  if (kind_ != Kind::MvGaussianMixture)
    throw std::logic_error("covariance: not an mv mixture target");
  return sigma_;
}

const Eigen::MatrixXd& TargetDistribution::covariance_inverse() const {
  if (kind_ != Kind::MvGaussianMixture)
    throw std::logic_error("covariance_inverse: not an mv mixture target");
  return sigma_inv_;
}

const std::vector<Eigen::VectorXd>& TargetDistribution::component_means()
    const {
  if (kind_ != Kind::MvGaussianMixture)
    throw std::logic_error("component_means: not an mv mixture target");
  return means_;
}

const std::vector<double>& TargetDistribution::component_weights() const {
  if (kind_ != Kind::MvGaussianMixture)
    throw std::logic_error("component_weights: not an mv mixture target");
  return weights_;
}

double expectation(const ScalarDensity& density,
                   const std::function<double(double)>& g, double tol,
                   int initial_splits) {
  const auto integrand = [&](double x) { return g(x) * density.rho(x); };
  const double lo = density.x_lo(), hi = density.x_hi();
  if (lo < 0.0 && 0.0 < hi) {
    const auto left = integrate(integrand, lo, 0.0, 0.5 * tol, 4000,
                                initial_splits);
    const auto right = integrate(integrand, 0.0, hi, 0.5 * tol, 4000,
                                 initial_splits);
    return left.value + right.value;
  }
  return integrate(integrand, lo, hi, tol, 4000, initial_splits).value;
}

double fisher_J(const ScalarDensity& density, double tol) {
  const double J = expectation(
      density,
      [&](double x) {
        const double s = density.d_log_rho(1, x);
        return s * s;
      },
      tol);
  if (!(J > 0.0)) throw std::runtime_error("fisher_J: J must be positive");
  return J;
}

Eigen::MatrixXd sample_stationary(const TargetDistribution& target, int n,
                                  RngStream& rng) {
  if (n < 1) throw std::invalid_argument("sample_stationary: n must be >= 1");
  Eigen::MatrixXd out(n, target.dimension());
  for (int i = 0; i < n; ++i) out.row(i) = target.sample(rng).transpose();
  return out;
}

}  // namespace rwmcv
