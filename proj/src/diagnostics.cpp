#include "rwmcv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rwmcv/errors.hpp"
#include "rwmcv/numerics.hpp"
#include "rwmcv/quadrature.hpp"
#include "rwmcv/sampler.hpp"

namespace rwmcv {

double sluggish_default(int d) {
  if (d < 2) throw DomainError("sluggish_default: requires d >= 2");
  return std::sqrt(2.0 * std::log(static_cast<double>(d)));
}

namespace {

bool in_set(const std::vector<std::pair<double, double>>& intervals,
            double x) {
  for (const auto& [a, b] : intervals)
    if (a < x && x < b) return true;
  return false;
}

}  // namespace

AdConstants compute_ad_constants(const ScalarDensity& density,
                                 const std::vector<double>& c_A_grid,
                                 double quad_tol, int scan_points,
                                 int initial_splits) {
  if (c_A_grid.empty())
    throw std::invalid_argument("compute_ad_constants: empty c_A grid");

  const double lo = density.x_lo(), hi = density.x_hi();
  const double dx = (hi - lo) / (scan_points - 1);

  const auto predicate = [&](double x, double c_A) {
    const double s = density.d_log_rho(1, x);
    const double t = density.d_log_rho(2, x);
    const double as = std::abs(s);
    return std::abs(t) < s * s && 1.0 / c_A < as && as < c_A;
  };

  // Interval detection: scan, then bisect each sign change of the predicate.
  const auto intervals_for = [&](double c_A) {
    std::vector<std::pair<double, double>> intervals;
    bool prev = predicate(lo, c_A);
    double open_at = prev ? lo : 0.0;
    for (int i = 1; i < scan_points; ++i) {
      const double x = lo + i * dx;
      const bool cur = predicate(x, c_A);
      if (cur != prev) {
        double a = x - dx, b = x;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (a + b);
          if (predicate(mid, c_A) == prev)
            a = mid;
          else
            b = mid;
        }
        const double edge = 0.5 * (a + b);
        if (prev)
          intervals.emplace_back(open_at, edge);
        else
          open_at = edge;
        prev = cur;
      }
    }
    if (prev) intervals.emplace_back(open_at, hi);
    return intervals;
  };

  const auto mass_of = [&](const std::vector<std::pair<double, double>>& iv) {
    double mass = 0.0;
    for (const auto& [a, b] : iv)
      mass += integrate([&](double x) { return density.rho(x); }, a, b,
                        quad_tol, 4000, initial_splits)
                  .value;
    return mass;
  };

  std::vector<double> grid = c_A_grid;
  std::sort(grid.begin(), grid.end());
  double best_mass = 0.0, best_c = 0.0;
  std::vector<std::pair<double, double>> best_iv;
  bool chosen = false;
  for (double c_A : grid) {
    auto iv = intervals_for(c_A);
    const double mass = iv.empty() ? 0.0 : mass_of(iv);
    if (!chosen && mass >= 0.05) {
      best_mass = mass;
      best_c = c_A;
      best_iv = std::move(iv);
      chosen = true;
      break;
    }
    if (mass > best_mass) {
      best_mass = mass;
      best_c = c_A;
      best_iv = std::move(iv);
    }
  }
  if (best_mass <= 0.0)
    throw EmptyA("compute_ad_constants: rho(A) = 0 for every c_A in the grid");

  AdConstants out;
  out.c_A = best_c;
  out.set_A = std::move(best_iv);
  out.rho_A = best_mass;
  out.exp_moment = expectation(
      density, [](double x) { return std::exp(std::abs(x)); }, quad_tol,
      initial_splits);
  out.J = fisher_J(density, quad_tol);
  const double J = out.J;
  out.c3 = std::sqrt(3.0 * expectation(
                               density,
                               [&](double x) {
                                 const double s = density.d_log_rho(1, x);
                                 const double v = s * s - J;
                                 return v * v;
                               },
                               quad_tol, initial_splits));
  out.c4 = std::sqrt(3.0 * expectation(
                               density,
                               [&](double x) {
                                 const double v = density.d_log_rho(2, x) + J;
                                 return v * v;
                               },
                               quad_tol, initial_splits));
  out.density = std::make_shared<const ScalarDensity>(density);
  return out;
}

AdMembership ad_membership(const AdConstants& consts, const Eigen::VectorXd& x,
                           double a_d) {
  const int d = static_cast<int>(x.size());
  if (d < 2) throw std::invalid_argument("ad_membership: requires d >= 2");
  const ScalarDensity& rho = *consts.density;

  double sum_exp = 0.0, sum_ind = 0.0, sum_grad2 = 0.0, sum_curv = 0.0;
  for (int i = 1; i < d; ++i) {
    const double xi = x(i);
    sum_exp += std::exp(std::abs(xi));
    sum_ind += in_set(consts.set_A, xi) ? 1.0 : 0.0;
    const double s = rho.d_log_rho(1, xi);
    sum_grad2 += s * s;
    sum_curv += rho.d_log_rho(2, xi);
  }
  const double inv = 1.0 / static_cast<double>(d - 1);
  const double rate = a_d / std::sqrt(static_cast<double>(d));
  // Degenerate targets (log rho'' constant) make both sides of condition 4
  // vanish together up to quadrature error; the absolute slack keeps the
  // strict comparison from emptying A_d there.
  const double slack = 1e-8 * (1.0 + std::abs(consts.J));

  AdMembership r;
  r.cond[0] = inv * sum_exp < 2.0 * consts.exp_moment;
  r.cond[1] = inv * sum_ind > 0.5 * consts.rho_A;
  r.cond[2] = std::abs(inv * sum_grad2 - consts.J) < rate * consts.c3 + slack;
  r.cond[3] = std::abs(inv * sum_curv + consts.J) < rate * consts.c4 + slack;
  r.in_Ad = r.cond[0] && r.cond[1] && r.cond[2] && r.cond[3];
  return r;
}

GeneratorEstimate generator_chain_mc(const TargetDistribution& target,
                                     const std::function<double(double)>& g,
                                     const Eigen::VectorXd& x, double l,
                                     int n_inner, RngStream& rng) {
  if (n_inner < 2)
    throw std::invalid_argument("generator_chain_mc: n_inner too small");
  const int d = target.dimension();
  const double scale = l / std::sqrt(static_cast<double>(d));
  const double log_rho_x = target.log_density(x);
  const double g_x = g(x(0));

  Eigen::VectorXd y(d);
  double sum = 0.0, sum_sq = 0.0;
  for (int j = 0; j < n_inner; ++j) {
    for (int i = 0; i < d; ++i) y(i) = x(i) + scale * rng.normal();
    const double log_ratio = target.log_density(y) - log_rho_x;
    const double alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    const double v = (g(y(0)) - g_x) * alpha;
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(n_inner);
  const double mean_v = sum / n;
  const double var_v = std::max(0.0, (sum_sq - n * mean_v * mean_v) / (n - 1));
  GeneratorEstimate r;
  r.estimate = static_cast<double>(d) * mean_v;
  r.std_error = static_cast<double>(d) * std::sqrt(var_v / n);
  return r;
}

SmoothFn SmoothFn::coordinate() {
  return {[](double x) { return x; }, [](double) { return 1.0; },
          [](double) { return 0.0; }};
}

SmoothFn SmoothFn::constant(double c) {
  return {[c](double) { return c; }, [](double) { return 0.0; },
          [](double) { return 0.0; }};
}

SmoothFn SmoothFn::scaled_coordinate(double a) {
  return {[a](double x) { return a * x; }, [a](double) { return a; },
          [](double) { return 0.0; }};
}

SmoothFn SmoothFn::from_solution(std::shared_ptr<const PoissonSolution> sol) {
  const double step = sol->meta().fd_step;
  return {[sol](double x) { return sol->evaluate(x); },
          [sol](double x) { return sol->derivative(x); },
          [sol, step](double x) {
            return (sol->derivative(x + step) - sol->derivative(x - step)) /
                   (2.0 * step);
          }};
}

GeneratorGapReport generator_gap_study(const ScalarDensity& rho,
                                       const SmoothFn& g,
                                       const std::vector<int>& d_grid,
                                       int n_points, int n_inner,
                                       std::uint64_t seed, unsigned workers,
                                       const AdConstants* condition,
                                       double l_override) {
  if (n_points < 1 || n_inner < 2)
    throw std::invalid_argument("generator_gap_study: bad sample sizes");
  const double J = fisher_J(rho);
  const double l = l_override > 0.0 ? l_override : optimal_l(J);
  const LimitConstants constants = LimitConstants::from(J, l);

  GeneratorGapReport report;
  for (int d : d_grid) {
    const TargetDistribution target = TargetDistribution::product(rho, d);
    const double a_d = d >= 2 ? sluggish_default(d) : 1.0;
    std::vector<double> gaps(n_points), ses(n_points);
    parallel_for(
        static_cast<std::size_t>(n_points), workers, [&](std::size_t p) {
          RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(d), p));
          Eigen::VectorXd x = target.sample(rng);
          if (condition) {
            for (int tries = 0; tries < 10000; ++tries) {
              if (ad_membership(*condition, x, a_d).in_Ad) break;
              x = target.sample(rng);
            }
          }
          const double limit =
              0.5 * constants.h_l *
              (g.second(x(0)) + rho.d_log_rho(1, x(0)) * g.deriv(x(0)));
          const auto mc =
              generator_chain_mc(target, g.value, x, l, n_inner, rng);
          gaps[p] = std::abs(limit - mc.estimate);
          ses[p] = mc.std_error;
        });
    GapRow row;
    row.d = d;
    row.n_points = n_points;
    row.n_inner = n_inner;
    row.mean_abs_gap = mean(gaps);
    row.q95_abs_gap = percentile(gaps, 95.0);
    row.mean_inner_se = mean(ses);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace rwmcv
