#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "conformal_lab/common.hpp"

namespace conformal_lab {

/// (p - 1) log((x^2 + y^2) / (x^2 - y^2)) + log x + log y - log k.
double level_relation_residual(double p, double k, double x, double y);

/// The y in (0, x) on the level curve ((x^2+y^2)/(x^2-y^2))^{p-1} x y = k.
///
/// p == 1 uses the closed form y = k / x and returns nullopt when that is not
/// below x (x <= sqrt(k)). For p > 1 a solution always exists; it is found by
/// bisection on the log form of the relation (geometric midpoints while the
/// bracket spans more than a factor 2), run until the bracket stops shrinking
/// or 200 steps. Throws ErrorKind::domain for p < 1, k <= 0 or x <= 0.
std::optional<double> level_solve(double p, double k, double x);

/// x at which the level curve has V = y / x:
/// log x = (log k - (p-1) log((1+V^2)/(1-V^2)) - log V) / 2.
double level_x_for_V(double p, double k, double V);

struct VW {
  double V = 0.0;  ///< A_k(x) / x
  double W = 0.0;  ///< x A_k(x)
};

/// Throws ErrorKind::domain when x lies outside the curve's range.
VW V_and_W(double p, double k, double x);

struct MonotonicityRow {
  double x = 0.0;
  double V = 0.0;
  double W = 0.0;
  double dV = 0.0;  ///< centered finite difference
  double dW = 0.0;
  bool V_decreasing = false;
  /// W' > 0, or W' == 0 up to roundoff when p == 1.
  bool W_increasing = false;
  double V_identity_error = 0.0;  ///< relative
  double W_identity_error = 0.0;  ///< relative (absolute |W'| x / W when p == 1)
  bool passed = false;
};

struct MonotonicityReport {
  double p = 0.0;
  double k = 0.0;
  double tolerance = 1e-6;
  std::vector<MonotonicityRow> rows;
  bool all_passed() const;
};

/// Checks V' < 0, W' > 0 and
///   V' [4(p-1)V/(1-V^4) + 1/V] = -2/x,
///   W' [4(p-1)x^4 W/(x^8-W^4) + 1/W] = 8(p-1)x^3 W^2/(x^8-W^4)
/// at every grid point with finite differences of step 1e-4 x.
MonotonicityReport monotonicity_check(double p, double k, const std::vector<double>& x_grid,
                                      double tolerance = 1e-6);

/// n points (x, A_k(x)) with x equispaced in [x_min, x_max].
std::vector<std::pair<double, double>> level_curve_points(double p, double k, double x_min,
                                                          double x_max, int n);

std::vector<double> geometric_grid(double lo, double hi, int n);

}  // namespace conformal_lab
