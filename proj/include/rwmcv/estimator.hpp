#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "rwmcv/poisson.hpp"
#include "rwmcv/sampler.hpp"
#include "rwmcv/targets.hpp"

namespace rwmcv {

using Observable = std::function<double(const Eigen::VectorXd&)>;

inline Observable first_coordinate() {
  return [](const Eigen::VectorXd& x) { return x(0); };
}

/// How the control-variate function is applied to states and proposals.
enum class CVMode { FirstCoordinate, FullState };

struct CVSpec {
  std::shared_ptr<const PoissonSolution> solution;  // null means zero CV
  CVMode applies_to = CVMode::FirstCoordinate;
  int n_MC = 50;  // inner IID proposals per chain state
  int d = 1;
  double l = 2.38;
};

struct EstimateResult {
  double plain = 0.0;      // ergodic average of f
  double corrected = 0.0;  // plain + d * mean(cv_values)
  std::vector<double> cv_values;
  std::uint64_t chain_seed = 0;
  std::uint64_t cv_seed = 0;
};

/// Arithmetic mean of f over the chain states (left-to-right summation).
double plain_average(const ChainSample& chain, const Observable& f);

/// Unbiased inner-MC estimate of (P_d f_hat - f_hat)(state): the average
/// over n_MC fresh proposals Y ~ N(state, l^2/d I) of
/// (1 ^ rho_d(Y)/rho_d(state)) * (f_hat(Y) - f_hat(state)).
double cv_correction(const TargetDistribution& target, const CVSpec& spec,
                     const Eigen::VectorXd& state, RngStream& rng);

/// Corrected ergodic average (1/T) sum_n [f(X_n) + d * cv_correction(X_n)].
/// The inner stream for step n derives from (cv_seed, n), so the result is
/// independent of evaluation order. Exactly corrected = plain +
/// d * mean(cv_values) with left-to-right sums.
EstimateResult cv_average(const ChainSample& chain,
                          const TargetDistribution& target, const CVSpec& spec,
                          std::uint64_t cv_seed, const Observable& f,
                          bool keep_cv_values = true);

/// Ratio of summed squared errors about the truth: plain over corrected.
double variance_reduction(const std::vector<double>& plain_runs,
                          const std::vector<double>& cv_runs, double truth);

/// Batch-means estimate of the asymptotic variance of the running mean of
/// a stationary series (the variance in the CLT normalization, i.e.
/// lim T * Var(mean)). The series is truncated to batch_count full batches.
double batch_means_variance(const std::vector<double>& values,
                            int batch_count);

}  // namespace rwmcv
