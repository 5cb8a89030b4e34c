#pragma once

#include <functional>
#include <string>
#include <vector>

#include "conformal_lab/common.hpp"

namespace conformal_lab {

enum class ProfileKind { power, custom };

/// Convex increasing integrand A : [1, inf) -> [1, inf) with its derivative and
/// the exponent p of the growth condition p A(t) <= t A'(t).
struct EnergyProfile {
  double p = 1.0;
  ProfileKind kind = ProfileKind::power;
  std::function<double(double)> eval;
  std::function<double(double)> deriv;
  std::string label;

  double operator()(double t) const { return eval(t); }
  double prime(double t) const { return deriv(t); }
};

/// A(t) = t^p. Throws ErrorKind::domain for p < 1.
EnergyProfile power_profile(double p);

/// User-supplied A; only usable after passing validate_profile.
EnergyProfile custom_profile(double p, std::function<double(double)> eval,
                             std::function<double(double)> deriv, std::string label);

struct ValidationEntry {
  std::string check;
  bool passed = true;
  double worst_t = 1.0;
  /// Smallest slack over the grid, attained at worst_t (>= 0 when passed).
  double worst_margin = 0.0;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  /// Effective exponent t A'(t)/A(t) well above p at t_max. Reported, not a failure.
  bool super_power_growth = false;
  double max_effective_exponent = 0.0;

  bool all_passed() const;
  const ValidationEntry& entry(const std::string& check) const;
};

inline constexpr int kValidationGridSize = 512;

/// Runs the monotone / convex / growth-condition battery on a geometric grid
/// of kValidationGridSize points in [1, t_max]. Throws ErrorKind::domain for
/// t_max < 2.
ValidationReport validate_profile(const EnergyProfile& profile, double t_max);

/// Throws ErrorKind::domain if the profile fails validation on [1, 1e4].
void require_valid_profile(const EnergyProfile& profile);

}  // namespace conformal_lab
