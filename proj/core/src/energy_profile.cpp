#include "conformal_lab/energy_profile.hpp"

#include <algorithm>
#include <cmath>

#include "conformal_lab/common.hpp"

namespace conformal_lab {

EnergyProfile power_profile(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    fail(ErrorKind::domain, "power profile needs p >= 1");
  }
  EnergyProfile prof;
  prof.p = p;
  prof.kind = ProfileKind::power;
  if (p == 1.0) {
    prof.eval = [](double t) { return t; };
    prof.deriv = [](double) { return 1.0; };
  } else if (p == 2.0) {
    prof.eval = [](double t) { return t * t; };
    prof.deriv = [](double t) { return 2.0 * t; };
  } else {
    prof.eval = [p](double t) { return std::pow(t, p); };
    prof.deriv = [p](double t) { return p * std::pow(t, p - 1.0); };
  }
  prof.label = "power(p=" + std::to_string(p) + ")";
  return prof;
}

EnergyProfile custom_profile(double p, std::function<double(double)> eval,
                             std::function<double(double)> deriv, std::string label) {
  if (!(p >= 1.0)) fail(ErrorKind::domain, "profile exponent must be >= 1");
  EnergyProfile prof;
  prof.p = p;
  prof.kind = ProfileKind::custom;
  prof.eval = std::move(eval);
  prof.deriv = std::move(deriv);
  prof.label = std::move(label);
  return prof;
}

bool ValidationReport::all_passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

const ValidationEntry& ValidationReport::entry(const std::string& check) const {
  for (const auto& e : entries) {
    if (e.check == check) return e;
  }
  fail(ErrorKind::domain, "no validation entry named " + check);
}

namespace {

struct Tracker {
  ValidationEntry e;
  explicit Tracker(std::string name) {
    e.check = std::move(name);
    e.worst_margin = INFINITY;
  }
  void observe(double t, double margin) {
    if (std::isnan(margin)) margin = -INFINITY;
    if (margin < e.worst_margin) {
      e.worst_margin = margin;
      e.worst_t = t;
    }
    if (margin < 0.0) e.passed = false;
  }
};

}  // namespace

ValidationReport validate_profile(const EnergyProfile& prof, double t_max) {
  if (!(t_max >= 2.0)) fail(ErrorKind::domain, "validation needs t_max >= 2");
  const int n = kValidationGridSize;
  std::vector<double> grid(n);
  const double ratio = std::log(t_max);
  for (int i = 0; i < n; ++i) grid[i] = std::exp(ratio * i / (n - 1));
  grid.back() = t_max;

  Tracker floor_check("A(1)>=1"), monotone("nondecreasing"), convex("convex"),
      growth("growth_condition"), derivative("derivative_matches"), dominates("A(t)>=t");

  const double a1 = prof.eval(1.0);
  floor_check.observe(1.0, a1 - 1.0);

  double max_exponent = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = grid[i];
    const double a = prof.eval(t);
    const double da = prof.deriv(t);
    if (i > 0) monotone.observe(t, a - prof.eval(grid[i - 1]));
    if (i > 0 && i + 1 < n) {
      const double lo = grid[i - 1], hi = grid[i + 1];
      const double mid = 0.5 * (lo + hi);
      const double chord = 0.5 * (prof.eval(lo) + prof.eval(hi));
      convex.observe(mid, chord + 1e-10 * std::max(1.0, std::abs(chord)) - prof.eval(mid));
    }
    // Relative form of p A(t) <= t A'(t), with a few ulps of slack.
    const double lhs = prof.p * a, rhs = t * da;
    growth.observe(t, (rhs - lhs) / std::max(1.0, std::abs(rhs)) + 1e-14);
    max_exponent = std::max(max_exponent, rhs / a);

    const double h = 1e-5 * t;
    const double fd = (prof.eval(t + h) - prof.eval(t - h)) / (2.0 * h);
    derivative.observe(t, 1e-6 - std::abs(fd - da) / std::max(std::abs(da), 1e-300));
    dominates.observe(t, a - t + 1e-14 * t);
  }

  ValidationReport rep;
  rep.entries = {floor_check.e, monotone.e, convex.e, growth.e, derivative.e, dominates.e};
  rep.max_effective_exponent = max_exponent;
  rep.super_power_growth = max_exponent > 1.5 * prof.p + 0.5;
  return rep;
}

void require_valid_profile(const EnergyProfile& profile) {
  const auto rep = validate_profile(profile, 1e4);
  for (const auto& e : rep.entries) {
    if (!e.passed) {
      fail(ErrorKind::domain, "profile " + profile.label + " fails check '" + e.check +
                                  "' at t=" + std::to_string(e.worst_t));
    }
  }
}

}  // namespace conformal_lab
