#include "rwmcv/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "rwmcv/errors.hpp"

namespace rwmcv {

double plain_average(const ChainSample& chain, const Observable& f) {
  const int T = chain.length();
  if (T < 1) throw std::invalid_argument("plain_average: empty chain");
  double sum = 0.0;
  for (int n = 0; n < T; ++n) sum += f(chain.states.row(n).transpose());
  return sum / static_cast<double>(T);
}

double cv_correction(const TargetDistribution& target, const CVSpec& spec,
                     const Eigen::VectorXd& state, RngStream& rng) {
  if (!spec.solution) return 0.0;
  if (spec.n_MC < 1) throw std::invalid_argument("cv_correction: n_MC >= 1");
  const int d = target.dimension();
  const double scale = spec.l / std::sqrt(static_cast<double>(d));
  const bool first_coord = spec.applies_to == CVMode::FirstCoordinate;
  const PoissonSolution& sol = *spec.solution;

  const double log_rho_x = target.log_density(state);
  const double fhat_x =
      first_coord ? sol.evaluate(state(0)) : sol.evaluate_state(state);

  Eigen::VectorXd proposal(d);
  double sum = 0.0;
  for (int j = 0; j < spec.n_MC; ++j) {
    for (int i = 0; i < d; ++i) proposal(i) = state(i) + scale * rng.normal();
    const double log_ratio = target.log_density(proposal) - log_rho_x;
    const double alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    const double fhat_y =
        first_coord ? sol.evaluate(proposal(0)) : sol.evaluate_state(proposal);
    sum += alpha * (fhat_y - fhat_x);
  }
  return sum / static_cast<double>(spec.n_MC);
}

EstimateResult cv_average(const ChainSample& chain,
                          const TargetDistribution& target, const CVSpec& spec,
                          std::uint64_t cv_seed, const Observable& f,
                          bool keep_cv_values) {
  const int T = chain.length();
  if (T < 1) throw std::invalid_argument("cv_average: empty chain");
  if (spec.d != target.dimension() || spec.l != chain.config.l)
    throw std::invalid_argument(
        "cv_average: spec does not match the chain's target and l");

  EstimateResult res;
  res.chain_seed = chain.config.seed;
  res.cv_seed = cv_seed;
  if (keep_cv_values) res.cv_values.reserve(T);

  double sum_f = 0.0, sum_cv = 0.0;
  Eigen::VectorXd state(target.dimension());
  for (int n = 0; n < T; ++n) {
    state = chain.states.row(n).transpose();
    sum_f += f(state);
    RngStream step_rng(derive_seed(cv_seed, static_cast<std::uint64_t>(n)));
    const double cv = cv_correction(target, spec, state, step_rng);
    sum_cv += cv;
    if (keep_cv_values) res.cv_values.push_back(cv);
  }
  const double Td = static_cast<double>(T);
  res.plain = sum_f / Td;
  res.corrected =
      res.plain + static_cast<double>(spec.d) * (sum_cv / Td);
  return res;
}

double variance_reduction(const std::vector<double>& plain_runs,
                          const std::vector<double>& cv_runs, double truth) {
  if (plain_runs.empty() || plain_runs.size() != cv_runs.size())
    throw std::invalid_argument("variance_reduction: need equal n_R >= 1");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < plain_runs.size(); ++k) {
    const double ep = plain_runs[k] - truth;
    const double ec = cv_runs[k] - truth;
    num += ep * ep;
    den += ec * ec;
  }
  if (den == 0.0)
    throw DegenerateDenominator(
        "variance_reduction: corrected runs hit the truth exactly");
  return num / den;
}

double batch_means_variance(const std::vector<double>& values,
                            int batch_count) {
  if (batch_count < 2)
    throw TooFewBatches("batch_means_variance: need at least 2 batches");
  const std::size_t b = values.size() / static_cast<std::size_t>(batch_count);
  if (b < 1)
    throw TooFewBatches("batch_means_variance: series shorter than batches");
  std::vector<double> means(batch_count, 0.0);
  for (int j = 0; j < batch_count; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < b; ++i) s += values[j * b + i];
    means[j] = s / static_cast<double>(b);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= batch_count;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return static_cast<double>(b) * ss / static_cast<double>(batch_count - 1);
}

}  // namespace rwmcv
