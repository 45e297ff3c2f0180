#include "rwmcv/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rwmcv/errors.hpp"
#include "rwmcv/numerics.hpp"

namespace rwmcv {

double h_of_l(double l, double J) {
  if (!(l > 0.0)) throw std::invalid_argument("h_of_l: l must be > 0");
  if (!(J >= 0.0)) throw std::invalid_argument("h_of_l: J must be >= 0");
  return 2.0 * l * l * normal_cdf(-0.5 * l * std::sqrt(J));
}

double PoissonSolution::evaluate(double x) const {
  if (!std::isfinite(x)) throw DomainError("PoissonSolution: non-finite x");
  if (kind_ == Kind::GaussianAnalytic)
    throw std::logic_error(
        "PoissonSolution: Gaussian CV takes the full state");
  return value_(x);
}

double PoissonSolution::derivative(double x) const {
  if (!std::isfinite(x)) throw DomainError("PoissonSolution: non-finite x");
  if (kind_ == Kind::GaussianAnalytic)
    throw std::logic_error("PoissonSolution: no scalar derivative for the "
                           "Gaussian CV");
  return deriv_(x);
}

double PoissonSolution::evaluate_state(const Eigen::VectorXd& x) const {
  if (kind_ == Kind::GaussianAnalytic) {
    if (x.size() != meta_.cv_coefficients.size())
      throw std::invalid_argument("evaluate_state: dim mismatch");
    return meta_.cv_coefficients.dot(x);
  }
  return evaluate(x(0));
}

PoissonSolution PoissonSolution::closed_form(
    std::function<double(double)> value, std::function<double(double)> deriv,
    Meta meta) {
  PoissonSolution s;
  s.kind_ = Kind::ClosedForm;
  s.meta_ = std::move(meta);
  s.value_ = std::move(value);
  s.deriv_ = std::move(deriv);
  return s;
}

PoissonSolution PoissonSolution::grid(Meta meta) {
  PoissonSolution s;
  s.kind_ = Kind::Grid;
  s.meta_ = std::move(meta);
  const auto& nodes = s.meta_.grid_nodes;
  const auto& values = s.meta_.grid_values;
  const std::size_t m = nodes.size();
  const double lo = nodes.front(), dx = nodes[1] - nodes[0];

  // Node-level derivative estimates: symmetric differences inside,
  // second-order one-sided at the ends.
  auto slopes = std::make_shared<std::vector<double>>(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i)
    (*slopes)[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
  (*slopes)[0] =
      (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
  (*slopes)[m - 1] =
      (3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) / (2.0 * dx);

  auto locate = [lo, dx, m](double x) {
    double t = (x - lo) / dx;
    std::size_t i = t <= 0.0 ? 0 : static_cast<std::size_t>(t);
    if (i > m - 2) i = m - 2;
    return i;
  };
  auto nodes_p = std::make_shared<std::vector<double>>(nodes);
  auto values_p = std::make_shared<std::vector<double>>(values);
  s.value_ = [nodes_p, values_p, locate](double x) {
    const auto& xs = *nodes_p;
    const auto& ys = *values_p;
    const std::size_t i = locate(x);
    const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return ys[i] + w * (ys[i + 1] - ys[i]);  // linear beyond the ends too
  };
  s.deriv_ = [nodes_p, slopes, locate](double x) {
    const auto& xs = *nodes_p;
    const auto& d = *slopes;
    if (x <= xs.front()) return d.front();
    if (x >= xs.back()) return d.back();
    const std::size_t i = locate(x);
    const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return d[i] + w * (d[i + 1] - d[i]);
  };
  return s;
}

PoissonSolution PoissonSolution::gaussian_analytic(Meta meta) {
  PoissonSolution s;
  s.kind_ = Kind::GaussianAnalytic;
  s.meta_ = std::move(meta);
  return s;
}

namespace {

struct ClosedFormData {
  CubicSpline inner;              // spline of I(y) over the full grid
  std::function<double(double)> log_rho;
  double h_l = 0.0;
  double q_lo = 0.0, q_hi = 0.0;  // evaluation window (quantile truncation)
  std::vector<double> eval_nodes; // q_lo, interior grid nodes, q_hi
  std::vector<double> cumulative; // integral of f_hat' from q_lo to node
  double grid_lo = 0.0, dx = 0.0;
  std::size_t k0 = 0;             // first full grid node inside the window
  double offset = 0.0;            // value of the raw antiderivative at 0

  double fhat_prime(double y) const {
    double yc = std::min(std::max(y, q_lo), q_hi);
    return 2.0 * inner(yc) / (h_l * std::exp(log_rho(yc)));
  }

  // Index of the eval-node segment containing x (x inside the window).
  std::size_t segment(double x) const {
    if (x <= eval_nodes[1]) return 0;
    if (x >= eval_nodes[eval_nodes.size() - 2]) return eval_nodes.size() - 2;
    const std::size_t g =
        static_cast<std::size_t>((x - grid_lo) / dx);  // full-grid interval
    return g - k0 + 1;
  }

  double antiderivative(double x) const {
    const std::size_t i = segment(x);
    const double a = eval_nodes[i];
    const double w = x - a;
    // Simpson over the partial segment.
    return cumulative[i] +
           w / 6.0 *
               (fhat_prime(a) + 4.0 * fhat_prime(a + 0.5 * w) + fhat_prime(x));
  }

  double value(double x) const {
    if (x < q_lo)
      return value(q_lo) + fhat_prime(q_lo) * (x - q_lo);
    if (x > q_hi)
      return value(q_hi) + fhat_prime(q_hi) * (x - q_hi);
    return antiderivative(x) - offset;
  }
};

}  // namespace

PoissonSolution solve_closed_form(const ScalarDensity& density,
                                  const std::function<double(double)>& f,
                                  double rho_f, const LimitConstants& constants,
                                  int inner_nodes) {
  if (inner_nodes < 100)
    throw std::invalid_argument("solve_closed_form: too few inner nodes");
  const double lo = density.x_lo(), hi = density.x_hi();
  const int n = inner_nodes;
  const double dx = (hi - lo) / (n - 1);

  std::vector<double> xs(n), rho(n), inner(n), cdf(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = lo + i * dx;
    rho[i] = density.rho(xs[i]);
  }
  // Inner cumulative integral I(y) = int_-inf^y rho (rho_f - f), trapezoid
  // on the grid (the truncated tail carries < 1e-12 mass).
  inner[0] = 0.0;
  cdf[0] = 0.0;
  double prev_g = rho[0] * (rho_f - f(xs[0]));
  for (int i = 1; i < n; ++i) {
    const double gi = rho[i] * (rho_f - f(xs[i]));
    inner[i] = inner[i - 1] + 0.5 * dx * (prev_g + gi);
    cdf[i] = cdf[i - 1] + 0.5 * dx * (rho[i - 1] + rho[i]);
    prev_g = gi;
  }

  // Quantile truncation of the evaluation window: 1/rho(y) overflows in the
  // far tails, and the control variate only needs f_hat near the chain.
  const double total = cdf[n - 1];
  auto quantile = [&](double p) {
    const double t = p * total;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), t);
    std::size_t j = it == cdf.begin()
                        ? 1
                        : static_cast<std::size_t>(it - cdf.begin());
    if (j >= cdf.size()) j = cdf.size() - 1;
    const double c0 = cdf[j - 1], c1 = cdf[j];
    const double w = c1 > c0 ? (t - c0) / (c1 - c0) : 0.0;
    return xs[j - 1] + w * dx;
  };

  auto data = std::make_shared<ClosedFormData>();
  data->inner = CubicSpline(xs, inner);
  const ScalarDensity rho_fn = density;
  data->log_rho = [rho_fn](double x) { return rho_fn.log_rho(x); };
  data->h_l = constants.h_l;
  data->q_lo = quantile(1e-8);
  data->q_hi = quantile(1.0 - 1e-8);
  data->grid_lo = lo;
  data->dx = dx;

  // Eval-node list: window endpoints plus every full grid node inside.
  std::size_t k0 = static_cast<std::size_t>(
      std::ceil((data->q_lo - lo) / dx - 1e-12));
  if (xs[k0] <= data->q_lo) ++k0;
  std::size_t k1 = static_cast<std::size_t>(
      std::floor((data->q_hi - lo) / dx + 1e-12));
  if (xs[k1] >= data->q_hi) --k1;
  data->k0 = k0;
  data->eval_nodes.push_back(data->q_lo);
  for (std::size_t i = k0; i <= k1; ++i) data->eval_nodes.push_back(xs[i]);
  data->eval_nodes.push_back(data->q_hi);

  data->cumulative.assign(data->eval_nodes.size(), 0.0);
  for (std::size_t i = 1; i < data->eval_nodes.size(); ++i) {
    const double a = data->eval_nodes[i - 1], b = data->eval_nodes[i];
    const double w = b - a;
    data->cumulative[i] =
        data->cumulative[i - 1] +
        w / 6.0 *
            (data->fhat_prime(a) + 4.0 * data->fhat_prime(a + 0.5 * w) +
             data->fhat_prime(b));
  }
  // Anchor f_hat(0) = 0 (linear extension if 0 lies outside the window).
  if (0.0 < data->q_lo)
    data->offset = -data->fhat_prime(data->q_lo) * (0.0 - data->q_lo);
  else if (0.0 > data->q_hi)
    data->offset = data->cumulative.back() +
                   data->fhat_prime(data->q_hi) * (0.0 - data->q_hi);
  else
    data->offset = data->antiderivative(0.0);

  PoissonSolution::Meta meta;
  meta.h_l = constants.h_l;
  meta.rho_f = rho_f;
  meta.domain_lo = data->q_lo;
  meta.domain_hi = data->q_hi;
  meta.fd_step = 1e-4 * (data->q_hi - data->q_lo);

  auto value = [data](double x) { return data->value(x); };
  auto deriv = [data](double x) { return data->fhat_prime(x); };
  return PoissonSolution::closed_form(value, deriv, std::move(meta));
}

PoissonSolution solve_grid(const std::function<double(double)>& log_rho,
                           const std::function<double(double)>& f,
                           double rho_f_hat,
                           const std::vector<double>& chain_coord1, double l,
                           int d, const LimitConstants& constants, int m) {
  if (chain_coord1.empty())
    throw std::invalid_argument("solve_grid: empty chain");
  if (m < 10) throw std::invalid_argument("solve_grid: need m >= 10");
  const auto [mn, mx] =
      std::minmax_element(chain_coord1.begin(), chain_coord1.end());
  const double pad = 3.0 * l / std::sqrt(static_cast<double>(d));
  const double lo = *mn - pad, hi = *mx + pad;
  const double dx = (hi - lo) / (m - 1);

  std::vector<double> xs(m), lr(m), s(m);
  for (int i = 0; i < m; ++i) {
    xs[i] = lo + i * dx;
    lr[i] = log_rho(xs[i]);
  }
  for (int i = 1; i + 1 < m; ++i) s[i] = (lr[i + 1] - lr[i - 1]) / (2.0 * dx);
  s[0] = (-3.0 * lr[0] + 4.0 * lr[1] - lr[2]) / (2.0 * dx);
  s[m - 1] = (3.0 * lr[m - 1] - 4.0 * lr[m - 2] + lr[m - 3]) / (2.0 * dx);

  const double c = 0.5 * constants.h_l;
  const double inv_dx2 = 1.0 / (dx * dx);
  const double inv_2dx = 1.0 / (2.0 * dx);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd b(m);
  for (int i = 1; i + 1 < m; ++i) {
    A(i, i - 1) = c * (inv_dx2 - s[i] * inv_2dx);
    A(i, i) = c * (-2.0 * inv_dx2);
    A(i, i + 1) = c * (inv_dx2 + s[i] * inv_2dx);
  }
  // One-sided second/first differences on the two boundary rows; every row
  // annihilates constants, so the system is rank deficient as expected.
  A(0, 0) = c * (inv_dx2 - 3.0 * s[0] * inv_2dx);
  A(0, 1) = c * (-2.0 * inv_dx2 + 4.0 * s[0] * inv_2dx);
  A(0, 2) = c * (inv_dx2 - s[0] * inv_2dx);
  A(m - 1, m - 1) = c * (inv_dx2 + 3.0 * s[m - 1] * inv_2dx);
  A(m - 1, m - 2) = c * (-2.0 * inv_dx2 - 4.0 * s[m - 1] * inv_2dx);
  A(m - 1, m - 3) = c * (inv_dx2 + s[m - 1] * inv_2dx);
  for (int i = 0; i < m; ++i) b(i) = rho_f_hat - f(xs[i]);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU |
                                            Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const Eigen::VectorXd u = svd.solve(b);
  const int rank = static_cast<int>(svd.rank());

  PoissonSolution::Meta meta;
  meta.h_l = constants.h_l;
  meta.rho_f = rho_f_hat;
  meta.domain_lo = lo;
  meta.domain_hi = hi;
  meta.fd_step = dx;
  meta.grid_nodes = xs;
  meta.grid_values.assign(u.data(), u.data() + m);
  meta.effective_rank = rank;
  meta.ill_conditioned = rank < m - 2;
  return PoissonSolution::grid(std::move(meta));
}

PoissonSolution gaussian_cv(const Eigen::MatrixXd& sigma, double l, int d) {
  if (sigma.rows() != d || sigma.cols() != d)
    throw std::invalid_argument("gaussian_cv: sigma must be d x d");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("gaussian_cv: covariance not positive definite");

  double J0 = 0.0;  // d = 1: the trace block is empty
  if (d > 1) {
    const Eigen::MatrixXd sigma_inv =
        llt.solve(Eigen::MatrixXd::Identity(d, d));
    J0 = sigma_inv.block(1, 1, d - 1, d - 1).trace() / static_cast<double>(d);
  }
  const double h0 = h_of_l(l, J0);

  PoissonSolution::Meta meta;
  meta.h_l = h0;
  meta.J0 = J0;
  meta.cv_coefficients = (2.0 / h0) * sigma.col(0);
  meta.domain_lo = -std::numeric_limits<double>::infinity();
  meta.domain_hi = std::numeric_limits<double>::infinity();
  return PoissonSolution::gaussian_analytic(std::move(meta));
}

double generator_limit(const ScalarDensity& density,
                       const std::function<double(double)>& g_deriv,
                       const std::function<double(double)>& g_second,
                       const LimitConstants& constants, double x) {
  return 0.5 * constants.h_l *
         (g_second(x) + density.d_log_rho(1, x) * g_deriv(x));
}

double generator_limit_fd(const ScalarDensity& density,
                          const std::function<double(double)>& g,
                          const LimitConstants& constants, double x,
                          double fd_step) {
  const double s = fd_step;
  const double gp = (g(x + s) - g(x - s)) / (2.0 * s);
  const double gpp = (g(x + s) - 2.0 * g(x) + g(x - s)) / (s * s);
  return 0.5 * constants.h_l * (gpp + density.d_log_rho(1, x) * gp);
}

double generator_limit(const ScalarDensity& density,
                       const PoissonSolution& solution,
                       const LimitConstants& constants, double x) {
  const double s = solution.meta().fd_step;
  const double gp = solution.derivative(x);
  const double gpp =
      (solution.derivative(x + s) - solution.derivative(x - s)) / (2.0 * s);
  return 0.5 * constants.h_l * (gpp + density.d_log_rho(1, x) * gp);
}

DensityTable::DensityTable(const ScalarDensity& density, int nodes) {
  const double lo = density.x_lo(), hi = density.x_hi();
  const double dx = (hi - lo) / (nodes - 1);
  x_.resize(nodes);
  cdf_.resize(nodes);
  double prev = density.rho(lo);
  x_[0] = lo;
  cdf_[0] = 0.0;
  for (int i = 1; i < nodes; ++i) {
    x_[i] = lo + i * dx;
    const double r = density.rho(x_[i]);
    cdf_[i] = cdf_[i - 1] + 0.5 * dx * (prev + r);
    prev = r;
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
}

double DensityTable::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("quantile: p outside [0,1]");
  auto it = std::lower_bound(cdf_.begin(), cdf_.end(), p);
  std::size_t j =
      it == cdf_.begin() ? 1 : static_cast<std::size_t>(it - cdf_.begin());
  if (j >= cdf_.size()) j = cdf_.size() - 1;
  const double c0 = cdf_[j - 1], c1 = cdf_[j];
  const double w = c1 > c0 ? (p - c0) / (c1 - c0) : 0.0;
  return x_[j - 1] + w * (x_[j] - x_[j - 1]);
}

double DensityTable::cdf(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return 1.0;
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - x_.begin());
  const double w = (x - x_[j - 1]) / (x_[j] - x_[j - 1]);
  return cdf_[j - 1] + w * (cdf_[j] - cdf_[j - 1]);
}

}  // namespace rwmcv
