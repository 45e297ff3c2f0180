#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "rwmcv/errors.hpp"
#include "rwmcv/estimator.hpp"
#include "rwmcv/numerics.hpp"
#include "test_helpers.hpp"

using namespace rwmcv;

namespace {

const auto identity_f = [](double x) { return x; };

std::shared_ptr<const PoissonSolution> zero_solution() {
  // An explicit all-zero grid solution; exercises the CV path end to end.
  PoissonSolution::Meta meta;
  meta.grid_nodes = {-5.0, 0.0, 5.0};
  meta.grid_values = {0.0, 0.0, 0.0};
  meta.h_l = 1.0;
  meta.fd_step = 5.0;
  return std::make_shared<const PoissonSolution>(PoissonSolution::grid(meta));
}

std::shared_ptr<const PoissonSolution> normal_mean_cv(double l) {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const auto constants = LimitConstants::from(1.0, l);
  return std::make_shared<const PoissonSolution>(
      solve_closed_form(rho, identity_f, expectation(rho, identity_f),
                        constants));
}

}  // namespace

TEST_SUITE_BEGIN("estimator");

TEST_CASE("plain_average: constants and single states") {
  ChainSample c;
  c.states = Eigen::MatrixXd::Random(7, 2);
  c.accepted.assign(7, 1);
  CHECK(plain_average(c, [](const Eigen::VectorXd&) { return 3.7; }) ==
        doctest::Approx(3.7).epsilon(1e-15));

  ChainSample single;
  single.states = Eigen::MatrixXd::Constant(1, 2, 1.25);
  single.accepted = {1};
  CHECK(plain_average(single, first_coordinate()) == 1.25);
}

TEST_CASE("cv_correction: zero solution gives exactly zero") {
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), 2);
  CVSpec spec{zero_solution(), CVMode::FirstCoordinate, 17, 2, 2.38};
  RngStream rng(3);
  const Eigen::VectorXd x = t.sample(rng);
  CHECK(cv_correction(t, spec, x, rng) == 0.0);
}

TEST_CASE("cv_correction: large-n_MC estimate matches an independent oracle") {
  const int d = 3;
  const double l = 2.38;
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), d);
  const auto sol = normal_mean_cv(l);
  Eigen::VectorXd x(d);
  x << 0.7, -0.3, 1.1;

  const int n = 1000000;
  CVSpec spec{sol, CVMode::FirstCoordinate, n, d, l};
  RngStream rng(100);
  const double ours = cv_correction(t, spec, x, rng);

  // Same expectation, fresh seed, summed by hand with a running variance.
  RngStream oracle(555);
  const double scale = l / std::sqrt(static_cast<double>(d));
  const double log_rho_x = t.log_density(x);
  const double fhat_x = sol->evaluate(x(0));
  double sum = 0.0, sum_sq = 0.0;
  Eigen::VectorXd y(d);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) y(i) = x(i) + scale * oracle.normal();
    const double lr = t.log_density(y) - log_rho_x;
    const double alpha = lr >= 0.0 ? 1.0 : std::exp(lr);
    const double v = alpha * (sol->evaluate(y(0)) - fhat_x);
    sum += v;
    sum_sq += v * v;
  }
  const double mean_o = sum / n;
  const double se = std::sqrt((sum_sq / n - mean_o * mean_o) / n);
  CHECK(std::abs(ours - mean_o) < 4.0 * std::sqrt(2.0) * se);
}

TEST_CASE("cv_correction: zero mean under stationarity") {
  const int d = 5;
  const double l = 2.38;
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), d);
  const auto sol = normal_mean_cv(l);
  CVSpec spec{sol, CVMode::FirstCoordinate, 10, d, l};

  const int n_states = 10000;
  RngStream draw_rng(808);
  std::vector<double> values(n_states);
  for (int i = 0; i < n_states; ++i) {
    const Eigen::VectorXd x = t.sample(draw_rng);
    RngStream inner(derive_seed(911, static_cast<std::uint64_t>(i)));
    values[i] = cv_correction(t, spec, x, inner);
  }
  CHECK(std::abs(mean(values)) < 5.0 * test_helpers::sd_of_mean(values));
}

TEST_CASE("cv_average: zero solution means corrected equals plain exactly") {
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), 2);
  const ChainSample chain = rwm_run(t, {2, 2.38, 500, 12});
  CVSpec spec{zero_solution(), CVMode::FirstCoordinate, 3, 2, 2.38};
  const EstimateResult r =
      cv_average(chain, t, spec, 77, first_coordinate());
  CHECK(r.corrected == r.plain);
  CHECK(r.plain == plain_average(chain, first_coordinate()));
}

TEST_CASE("cv_average: estimator identity is exact in floating point") {
  const int d = 3;
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), d);
  const ChainSample chain = rwm_run(t, {d, 2.38, 400, 5150});
  CVSpec spec{normal_mean_cv(2.38), CVMode::FirstCoordinate, 5, d, 2.38};
  const EstimateResult r = cv_average(chain, t, spec, 31, first_coordinate());
  REQUIRE(static_cast<int>(r.cv_values.size()) == chain.length());
  double sum_cv = 0.0;
  for (double v : r.cv_values) sum_cv += v;  // left-to-right, as specified
  const double reconstructed =
      r.plain + static_cast<double>(d) * (sum_cv / chain.length());
  CHECK(r.corrected == reconstructed);
}

TEST_CASE("cv_average: unbiased even with n_MC = 1") {
  const int d = 3, n_runs = 200, T = 300;
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), d);
  const auto sol = normal_mean_cv(2.38);
  std::vector<double> corrected(n_runs);
  for (int k = 0; k < n_runs; ++k) {
    const ChainSample chain =
        rwm_run(t, {d, 2.38, T, derive_seed(606, static_cast<std::uint64_t>(k))});
    CVSpec spec{sol, CVMode::FirstCoordinate, 1, d, 2.38};
    corrected[k] = cv_average(chain, t, spec,
                              derive_seed(607, static_cast<std::uint64_t>(k)),
                              first_coordinate(), false)
                       .corrected;
  }
  // rho_d(f) = 0 for the standard normal product.
  CHECK(std::abs(mean(corrected)) < 4.0 * test_helpers::sd_of_mean(corrected));
}

TEST_CASE("cv_average: analytic gaussian CV shrinks the variance at d=10") {
  const int d = 10, n_runs = 50, T = 4000;
  const double l = 2.38;
  const TargetDistribution t =
      TargetDistribution::product(ScalarDensity::standard_normal(), d);
  const auto sol = std::make_shared<const PoissonSolution>(
      gaussian_cv(Eigen::MatrixXd::Identity(d, d), l, d));
  std::vector<double> plain(n_runs), corrected(n_runs);
  for (int k = 0; k < n_runs; ++k) {
    const ChainSample chain =
        rwm_run(t, {d, l, T, derive_seed(7000, static_cast<std::uint64_t>(k))});
    CVSpec spec{sol, CVMode::FullState, 20, d, l};
    const EstimateResult r = cv_average(
        chain, t, spec, derive_seed(7001, static_cast<std::uint64_t>(k)),
        first_coordinate(), false);
    plain[k] = r.plain;
    corrected[k] = r.corrected;
  }
  CHECK(sample_variance(corrected) < sample_variance(plain));
}

TEST_CASE("variance_reduction: arithmetic and degeneracy") {
  CHECK(variance_reduction({1.2, 0.8, 1.1}, {1.2, 0.8, 1.1}, 1.0) == 1.0);
  // Plain errors all 2e, corrected errors all e: ratio 4.
  CHECK(variance_reduction({1.2, 1.2}, {1.1, 1.1}, 1.0) ==
        doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(variance_reduction({1.5}, {1.0}, 1.0),
                  DegenerateDenominator);
  CHECK_THROWS_AS(variance_reduction({1.0}, {1.0, 2.0}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("batch_means_variance: IID, constant, AR(1)") {
  const int n = 1000000;
  RngStream rng(13);
  std::vector<double> iid(n);
  for (double& v : iid) v = rng.normal();
  CHECK(std::abs(batch_means_variance(iid, 1000) - 1.0) < 0.15);

  const std::vector<double> flat(5000, 2.5);
  CHECK(batch_means_variance(flat, 100) == 0.0);

  // AR(1), phi = 0.5: asymptotic variance of the mean is
  // (1+phi)/(1-phi) * Var(marginal) = 3 * (1/(1-phi^2)) = 4.
  std::vector<double> ar(n);
  double x = 0.0;
  for (int i = 0; i < n; ++i) {
    x = 0.5 * x + rng.normal();
    ar[i] = x;
  }
  CHECK(std::abs(batch_means_variance(ar, 1000) - 4.0) < 0.2 * 4.0);

  CHECK_THROWS_AS(batch_means_variance(iid, 1), TooFewBatches);
  CHECK_THROWS_AS(batch_means_variance({1.0, 2.0}, 5), TooFewBatches);
}

TEST_CASE("asymptotic-variance scaling proxy: corrected ~ log d, plain ~ d") {
  // Bounded-ratio check between d=8 and d=64 for the standard-normal
  // product with the analytic CV; n_MC grows with d so the inner-MC noise
  // contributes O(1) per step at every d.
  const double l = 2.38;
  const int T = 40000, batches = 50;
  double bmv_plain[2], bmv_corr[2];
  const int dims[2] = {8, 64};
  for (int idx = 0; idx < 2; ++idx) {
    const int d = dims[idx];
    const TargetDistribution t =
        TargetDistribution::product(ScalarDensity::standard_normal(), d);
    const auto sol = std::make_shared<const PoissonSolution>(
        gaussian_cv(Eigen::MatrixXd::Identity(d, d), l, d));
    const ChainSample chain =
        rwm_run(t, {d, l, T, static_cast<std::uint64_t>(31337 + d)});
    CVSpec spec{sol, CVMode::FullState, 2 * d, d, l};
    const EstimateResult r =
        cv_average(chain, t, spec, static_cast<std::uint64_t>(41337 + d),
                   first_coordinate(), true);
    std::vector<double> plain_series(T), corr_series(T);
    for (int n = 0; n < T; ++n) {
      plain_series[n] = chain.states(n, 0);
      corr_series[n] =
          chain.states(n, 0) + static_cast<double>(d) * r.cv_values[n];
    }
    bmv_plain[idx] = batch_means_variance(plain_series, batches);
    bmv_corr[idx] = batch_means_variance(corr_series, batches);
  }
  const double r_plain = (bmv_plain[1] / 64.0) / (bmv_plain[0] / 8.0);
  const double r_corr = (bmv_corr[1] / std::log(64.0)) /
                        (bmv_corr[0] / std::log(8.0));
  CHECK(r_plain > 0.25);
  CHECK(r_plain < 4.0);
  CHECK(r_corr > 0.25);
  CHECK(r_corr < 4.0);
}

TEST_SUITE_END();
