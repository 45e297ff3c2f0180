#include "rwmcv/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rwmcv/errors.hpp"

namespace rwmcv {

namespace {

// 15-point Kronrod nodes (positive half) with the embedded 7-point Gauss rule.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a, b, value, error;
  bool operator<(const Interval& o) const { return error < o.error; }
};

Interval gk15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  const double fc = f(center);
  double resg = kWg[3] * fc;
  double resk = kWgk[7] * fc;
  double resabs = kWgk[7] * std::abs(fc);
  double fv[15];
  fv[14] = fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    fv[j] = f1;
    fv[7 + j] = f2;
    resk += kWgk[j] * (f1 + f2);
    resabs += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += kWg[j / 2] * (f1 + f2);
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kWgk[j] *
              (std::abs(fv[j] - reskh) + std::abs(fv[7 + j] - reskh));
  resasc *= half;
  resabs *= half;

  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps_floor = 50.0 * 2.220446049250313e-16 * resabs;
  if (eps_floor > 0.0) err = std::max(err, eps_floor);

  return {a, b, resk * half, err};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a,
                           double b, double tol, int max_subdivisions,
                           int initial_splits) {
  if (!(tol > 0.0)) throw std::invalid_argument("integrate: tol must be > 0");
  if (initial_splits < 1) initial_splits = 1;

  std::priority_queue<Interval> work;
  double total = 0.0, total_err = 0.0;
  const double width = (b - a) / initial_splits;
  for (int k = 0; k < initial_splits; ++k) {
    Interval iv = gk15(f, a + k * width, (k + 1 == initial_splits)
                                             ? b
                                             : a + (k + 1) * width);
    total += iv.value;
    total_err += iv.error;
    work.push(iv);
  }

  int splits = 0;
  while (total_err > tol && splits < max_subdivisions) {
    Interval worst = work.top();
    work.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Interval left = gk15(f, worst.a, mid);
    Interval right = gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    work.push(left);
    work.push(right);
    ++splits;
  }
  if (total_err > tol)
    throw QuadratureNonConvergence("quadrature: subdivision budget exhausted",
                                   total, total_err);
  return {total, total_err, splits};
}

}  // namespace rwmcv
