#include "conformal_lab/level_curve.hpp"

#include <algorithm>
#include <cmath>

#include "conformal_lab/common.hpp"

namespace conformal_lab {

namespace {

void require_inputs(double p, double k, double x) {
  if (!(p >= 1.0)) fail(ErrorKind::domain, "level curve needs p >= 1");
  if (!(k > 0.0)) fail(ErrorKind::domain, "level curve needs k > 0");
  if (!(x > 0.0)) fail(ErrorKind::domain, "level curve needs x > 0");
}

}  // namespace

double level_relation_residual(double p, double k, double x, double y) {
  const double ratio_log = std::log1p(2.0 * y * y / ((x - y) * (x + y)));
  return (p - 1.0) * ratio_log + std::log(x) + std::log(y) - std::log(k);
}

std::optional<double> level_solve(double p, double k, double x) {
  require_inputs(p, k, x);
  if (p == 1.0) {
    const double y = k / x;
    if (!(y < x)) return std::nullopt;
    return y;
  }
  auto g = [&](double y) { return level_relation_residual(p, k, x, y); };
  double hi = x;
  double lo = 0.5 * x;
  for (int i = 0; i < 2000 && g(lo) >= 0.0; ++i) lo *= 0.5;
  if (!(lo > 0.0) || g(lo) >= 0.0) fail(ErrorKind::domain, "level_solve could not bracket the root");
  for (int i = 0; i < 200; ++i) {
    const double mid = hi > 2.0 * lo ? std::sqrt(lo) * std::sqrt(hi) : lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    (gm < 0.0 ? lo : hi) = mid;
  }
  if (hi == x) return lo;
  return std::abs(g(lo)) <= std::abs(g(hi)) ? lo : hi;
}

double level_x_for_V(double p, double k, double V) {
  if (!(V > 0.0 && V < 1.0)) fail(ErrorKind::domain, "V must lie in (0, 1)");
  if (!(k > 0.0)) fail(ErrorKind::domain, "level curve needs k > 0");
  const double v2 = V * V;
  return std::exp(0.5 * (std::log(k) - (p - 1.0) * std::log1p(2.0 * v2 / (1.0 - v2)) - std::log(V)));
}

VW V_and_W(double p, double k, double x) {
  const auto y = level_solve(p, k, x);
  if (!y) fail(ErrorKind::domain, "x lies outside the level curve's range");
  return {*y / x, x * *y};
}

bool MonotonicityReport::all_passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const MonotonicityRow& r) { return r.passed; });
}

MonotonicityReport monotonicity_check(double p, double k, const std::vector<double>& x_grid,
                                      double tolerance) {
  MonotonicityReport rep;
  rep.p = p;
  rep.k = k;
  rep.tolerance = tolerance;
  for (double x : x_grid) {
    MonotonicityRow row;
    row.x = x;
    // Five-point stencil; W' is tiny against W for large x, so the step is wide.
    const double h = 4e-3 * x;
    const VW mid = V_and_W(p, k, x);
    const VW p1 = V_and_W(p, k, x + h), p2 = V_and_W(p, k, x + 2.0 * h);
    const VW m1 = V_and_W(p, k, x - h), m2 = V_and_W(p, k, x - 2.0 * h);
    row.V = mid.V;
    row.W = mid.W;
    row.dV = (8.0 * (p1.V - m1.V) - (p2.V - m2.V)) / (12.0 * h);
    row.dW = (8.0 * (p1.W - m1.W) - (p2.W - m2.W)) / (12.0 * h);

    const double V = mid.V, W = mid.W;
    const double v_lhs = row.dV * (4.0 * (p - 1.0) * V / (1.0 - V * V * V * V) + 1.0 / V);
    const double v_rhs = -2.0 / x;
    row.V_identity_error = std::abs(v_lhs - v_rhs) / std::abs(v_rhs);
    row.V_decreasing = row.dV < 0.0;

    const double x4 = x * x * x * x;
    const double den = x4 * x4 - W * W * W * W;
    const double w_lhs = row.dW * (4.0 * (p - 1.0) * x4 * W / den + 1.0 / W);
    const double w_rhs = 8.0 * (p - 1.0) * x * x * x * W * W / den;
    if (p == 1.0) {
      row.W_identity_error = std::abs(row.dW) * x / W;
      row.W_increasing = row.W_identity_error <= tolerance;
    } else {
      row.W_identity_error = std::abs(w_lhs - w_rhs) / std::max(std::abs(w_lhs), std::abs(w_rhs));
      row.W_increasing = row.dW > 0.0;
    }
    row.passed = row.V_decreasing && row.W_increasing && row.V_identity_error <= tolerance &&
                 row.W_identity_error <= tolerance;
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<std::pair<double, double>> level_curve_points(double p, double k, double x_min,
                                                          double x_max, int n) {
  if (n < 2) fail(ErrorKind::domain, "need at least 2 curve points");
  if (!(x_min > 0.0 && x_max > x_min)) fail(ErrorKind::domain, "need 0 < x_min < x_max");
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = x_min + (x_max - x_min) * i / (n - 1);
    const auto y = level_solve(p, k, x);
    if (!y) fail(ErrorKind::domain, "x = " + std::to_string(x) + " lies outside the level curve's range");
    out.emplace_back(x, *y);
  }
  return out;
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
  if (n < 2 || !(lo > 0.0 && hi > lo)) fail(ErrorKind::domain, "geometric grid needs 0 < lo < hi, n >= 2");
  std::vector<double> g(n);
  const double r = std::log(hi / lo);
  for (int i = 0; i < n; ++i) g[i] = lo * std::exp(r * i / (n - 1));
  g.back() = hi;
  return g;
}

}  // namespace conformal_lab
