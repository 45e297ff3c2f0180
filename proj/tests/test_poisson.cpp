#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "rwmcv/errors.hpp"
#include "rwmcv/numerics.hpp"
#include "rwmcv/poisson.hpp"
#include "rwmcv/quadrature.hpp"
#include "rwmcv/sampler.hpp"
#include "test_helpers.hpp"

using namespace rwmcv;
using test_helpers::bimodal_mixture;

namespace {

const auto identity_f = [](double x) { return x; };

// Quadrature-based normal CDF, independent of the erfc path in normal_cdf.
double cdf_oracle(double x) {
  return integrate([](double t) { return normal_pdf(t); }, -12.0, x, 1e-14)
      .value;
}

}  // namespace

TEST_SUITE_BEGIN("poisson");

TEST_CASE("h_of_l: small-l limit, CDF oracle, monotone in J") {
  // h(l)/l^2 -> 1 as l -> 0 (Phi(0) = 1/2).
  const double h_small = h_of_l(0.001, 1.0);
  CHECK(std::abs(h_small - 2e-6 * normal_cdf(-0.0005)) < 1e-18);
  CHECK(std::abs(h_small / (0.001 * 0.001) - 1.0) < 1e-3);

  for (double l : {0.5, 1.0, 2.38, 4.0})
    CHECK(std::abs(h_of_l(l, 1.0) - 2.0 * l * l * cdf_oracle(-0.5 * l)) <
          1e-12);

  RngStream rng(17);
  for (int i = 0; i < 100; ++i) {
    const double l = 0.1 + 6.0 * rng.uniform();
    const double J1 = 0.1 + 3.0 * rng.uniform();
    const double J2 = J1 + 0.1 + 2.0 * rng.uniform();
    CHECK(h_of_l(l, J1) > h_of_l(l, J2));
  }
}

TEST_CASE("LimitConstants::from keeps h consistent") {
  const auto c = LimitConstants::from(0.7, 1.9);
  CHECK(c.h_l == h_of_l(1.9, 0.7));
}

TEST_CASE("closed form: standard normal mean function is linear") {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const auto constants = LimitConstants::from(1.0, 2.38);
  const double rho_f = expectation(rho, identity_f);
  const PoissonSolution sol =
      solve_closed_form(rho, identity_f, rho_f, constants);

  const double slope = 2.0 / constants.h_l;
  double max_rel = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double x = -4.0 + 8.0 * i / 400.0;
    if (std::abs(x) < 0.01) continue;
    max_rel = std::max(max_rel, std::abs(sol.evaluate(x) - slope * x) /
                                    (slope * std::abs(x)));
  }
  CHECK(max_rel < 1e-4);
  CHECK(sol.evaluate(0.0) == 0.0);
  // Exposed derivative is the integrand ratio, constant for this case.
  CHECK(std::abs(sol.derivative(1.3) - slope) < 1e-4 * slope);
}

TEST_CASE("closed form: constant f gives the zero solution exactly") {
  const ScalarDensity rho = bimodal_mixture().to_density();
  const auto constants = LimitConstants::from(fisher_J(rho), 3.0);
  const PoissonSolution sol = solve_closed_form(
      rho, [](double) { return 2.5; }, 2.5, constants);
  for (double x : {-6.0, -1.0, 0.0, 2.0, 5.5}) {
    CHECK(sol.evaluate(x) == 0.0);
    CHECK(sol.derivative(x) == 0.0);
  }
}

TEST_CASE("closed form: generator residual on the bimodal mixture") {
  const ScalarDensity rho = bimodal_mixture().to_density();
  const double J = fisher_J(rho);
  const auto constants = LimitConstants::from(J, optimal_l(J));
  const double rho_f = expectation(rho, identity_f);
  const PoissonSolution sol =
      solve_closed_form(rho, identity_f, rho_f, constants);

  const DensityTable table(rho);
  double max_abs = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double x = table.quantile((i + 0.5) / 200.0);
    const double residual =
        generator_limit(rho, sol, constants, x) - (rho_f - x);
    max_abs = std::max(max_abs, std::abs(residual));
  }
  CHECK(max_abs <= 1e-3);
}

TEST_CASE("generator_limit: trivial identities") {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const auto constants = LimitConstants::from(1.0, 2.38);
  // Constant g.
  for (double x : {-2.0, 0.0, 1.7})
    CHECK(generator_limit_fd(rho, [](double) { return 3.0; }, constants, x,
                             1e-4) == 0.0);
  // g(x) = x^2 at x=1: g'' + (log rho)' g' = 2 - 2 = 0 for any h.
  const double at_one = generator_limit(
      rho, [](double x) { return 2.0 * x; }, [](double) { return 2.0; },
      constants, 1.0);
  CHECK(at_one == 0.0);
  // With h pinned to 2 the formula reads 2 - 2 x^2.
  const LimitConstants pinned{1.0, 2.38, 2.0};
  const double at_half = generator_limit(
      rho, [](double x) { return 2.0 * x; }, [](double) { return 2.0; },
      pinned, 0.5);
  CHECK(at_half == doctest::Approx(2.0 - 2.0 * 0.25).epsilon(1e-14));
}

TEST_CASE("analytic anchor: G applied to 2x/h(l) returns -x") {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const auto constants = LimitConstants::from(1.0, 2.38);
  const double slope = 2.0 / constants.h_l;
  for (double x : {-3.0, -0.7, 0.0, 1.1, 2.9}) {
    const double v = generator_limit(
        rho, [slope](double) { return slope; }, [](double) { return 0.0; },
        constants, x);
    CHECK(std::abs(v - (-x)) < 1e-12);
  }
}

TEST_CASE("grid solver: standard normal with exact inputs") {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const double l = 2.38;
  const int d = 10;
  const auto constants = LimitConstants::from(1.0, l);
  const double pad = 3.0 * l / std::sqrt(10.0);
  // Chain range chosen so the padded grid is exactly [-4, 4].
  const std::vector<double> coord1{-4.0 + pad, 4.0 - pad};
  const PoissonSolution sol = solve_grid(
      [&](double x) { return rho.log_rho(x); }, identity_f, 0.0, coord1, l, d,
      constants, 100);

  CHECK(sol.meta().effective_rank == 99);
  CHECK_FALSE(sol.meta().ill_conditioned);
  const double slope = 2.0 / constants.h_l;
  const auto& nodes = sol.meta().grid_nodes;
  const auto& values = sol.meta().grid_values;
  REQUIRE(nodes.size() == 100);
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) {
    if (std::abs(nodes[i]) < 0.1) continue;
    CHECK(std::abs(values[i] - slope * nodes[i]) <
          0.02 * std::abs(slope * nodes[i]));
  }
}

TEST_CASE("grid solver: constant f gives a constant solution") {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const auto constants = LimitConstants::from(1.0, 2.38);
  const std::vector<double> coord1{-2.0, 2.0};
  const PoissonSolution sol = solve_grid(
      [&](double x) { return rho.log_rho(x); }, [](double) { return 4.0; },
      4.0, coord1, 2.38, 5, constants, 60);
  const auto& values = sol.meta().grid_values;
  for (double v : values) CHECK(std::abs(v - values[0]) < 1e-9);
}

TEST_CASE("solver cross-agreement: closed form vs grid on the bimodal mixture") {
  const ScalarDensity rho = bimodal_mixture().to_density();
  const double J = fisher_J(rho);
  const double l = optimal_l(J);
  const auto constants = LimitConstants::from(J, l);
  const double rho_f = expectation(rho, identity_f);
  const PoissonSolution closed =
      solve_closed_form(rho, identity_f, rho_f, constants);

  RngStream rng(2718);
  std::vector<double> coord1(20000);
  for (double& c : coord1) c = rho.sample(rng);
  const int d = 5;
  const PoissonSolution grid =
      solve_grid([&](double x) { return rho.log_rho(x); }, identity_f, rho_f,
                 coord1, l, d, constants, 100);

  const auto& nodes = grid.meta().grid_nodes;
  const auto& values = grid.meta().grid_values;
  // Solutions differ by a free constant; align on the compared nodes.
  double shift = 0.0;
  for (std::size_t i = 2; i + 2 < nodes.size(); ++i)
    shift += values[i] - closed.evaluate(nodes[i]);
  shift /= static_cast<double>(nodes.size() - 4);
  // Pointwise-relative is ill-posed where the solution crosses zero (it is
  // only defined up to a constant), so the comparison floors the
  // denominator at the solution's RMS over the compared nodes.
  double rms = 0.0;
  for (std::size_t i = 2; i + 2 < nodes.size(); ++i) {
    const double cf = closed.evaluate(nodes[i]);
    rms += cf * cf;
  }
  rms = std::sqrt(rms / static_cast<double>(nodes.size() - 4));
  for (std::size_t i = 2; i + 2 < nodes.size(); ++i) {
    const double cf = closed.evaluate(nodes[i]);
    const double diff = std::abs(values[i] - shift - cf);
    CHECK(diff <= 0.02 * std::max(std::abs(cf), rms));
  }
}

TEST_CASE("gaussian_cv: identity covariance and the d=1 convention") {
  const int d = 8;
  const double l = 2.38;
  const PoissonSolution sol =
      gaussian_cv(Eigen::MatrixXd::Identity(d, d), l, d);
  CHECK(sol.meta().J0 == doctest::Approx((d - 1.0) / d).epsilon(1e-14));
  const double h0 = h_of_l(l, sol.meta().J0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  x(0) = 1.7;
  x(3) = -2.0;  // must not contribute
  CHECK(sol.evaluate_state(x) ==
        doctest::Approx(2.0 / h0 * 1.7).epsilon(1e-14));

  Eigen::MatrixXd s11(1, 1);
  s11(0, 0) = 25.0;
  const PoissonSolution one = gaussian_cv(s11, l, 1);
  CHECK(one.meta().J0 == 0.0);
  CHECK(one.meta().h_l == doctest::Approx(l * l).epsilon(1e-14));
  Eigen::VectorXd x1(1);
  x1(0) = 0.4;
  CHECK(one.evaluate_state(x1) ==
        doctest::Approx(2.0 / (l * l) * 25.0 * 0.4).epsilon(1e-14));
}

TEST_CASE("gaussian_cv: spectral oracle for the benchmark covariance") {
  const int d = 20;
  const double lambda = 25.0;
  const TargetDistribution t = TargetDistribution::bimodal_gaussian(d, 0.0);
  const PoissonSolution sol = gaussian_cv(t.covariance(), 2.4, d);
  // Sigma^-1 = I + (1/lambda - 1) v v^T gives the block trace directly.
  const double diag_inv = 1.0 + (1.0 / lambda - 1.0) / d;
  const double J0_spectral = (d - 1.0) * diag_inv / d;
  CHECK(std::abs(sol.meta().J0 - J0_spectral) < 1e-10);
}

TEST_CASE("gaussian_cv: rejects indefinite covariance") {
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(3, 3);
  bad(2, 2) = -1.0;
  CHECK_THROWS_AS(gaussian_cv(bad, 2.0, 3), NotPositiveDefinite);
}

TEST_CASE("gaussian consistency: closed form with J0 matches the linear CV") {
  const double sigma = 1.3;
  const int d = 5;
  const double l = 2.2;
  const ScalarDensity rho = ScalarDensity::normal(0.0, sigma);
  const PoissonSolution lin =
      gaussian_cv(sigma * sigma * Eigen::MatrixXd::Identity(d, d), l, d);
  const double J0 = lin.meta().J0;
  CHECK(J0 == doctest::Approx((d - 1.0) / (d * sigma * sigma)).epsilon(1e-12));

  const auto constants = LimitConstants::from(J0, l);
  const double rho_f = expectation(rho, identity_f);
  const PoissonSolution closed =
      solve_closed_form(rho, identity_f, rho_f, constants);
  for (int i = 0; i <= 80; ++i) {
    const double x = -4.0 * sigma + 8.0 * sigma * i / 80.0;
    if (std::abs(x) < 0.05) continue;
    Eigen::VectorXd state = Eigen::VectorXd::Zero(d);
    state(0) = x;
    const double a = closed.evaluate(x);
    const double b = lin.evaluate_state(state);
    CHECK(std::abs(a - b) <= 1e-6 * std::max(std::abs(b), 0.01));
  }
}

TEST_CASE("poisson solutions reject non-finite input") {
  const ScalarDensity rho = ScalarDensity::standard_normal();
  const auto constants = LimitConstants::from(1.0, 2.38);
  const PoissonSolution sol = solve_closed_form(rho, identity_f, 0.0, constants);
  CHECK_THROWS_AS(sol.evaluate(std::nan("")), DomainError);
  const PoissonSolution lin = gaussian_cv(Eigen::MatrixXd::Identity(2, 2), 2.0, 2);
  CHECK_THROWS_AS(lin.evaluate(1.0), std::logic_error);
}

TEST_SUITE_END();
