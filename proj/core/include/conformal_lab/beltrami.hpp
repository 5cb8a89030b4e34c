#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/energy_profile.hpp"
#include "conformal_lab/hopf.hpp"

namespace conformal_lab {

/// How the level value k is read off the Hopf differential.
enum class KConvention {
  /// k = |Phi| / p, so that B exactly inverts Phi = p K^{p-1} h_w conj(h_wbar).
  scaled,
  /// k = |Phi|.
  raw,
};

KConvention parse_k_convention(const std::string& name);
std::string to_string(KConvention c);

/// B(w, xi) = conj(Phi(w)) / |Phi(w)| * A_k(|xi|) * xi / |xi| for A(t) = t^p.
struct BeltramiOp {
  double p = 2.0;
  std::function<Complex(Complex)> Phi;
  KConvention convention = KConvention::scaled;

  double k_of(Complex phi) const;
};

/// Returns 0 where Phi(w) == 0. Throws ErrorKind::singular_argument for
/// xi == 0 with Phi(w) != 0 and ErrorKind::domain for p < 1. At p == 1 the
/// closed form A_k(x) = k / x is used without the y < x restriction.
Complex eval_B(const BeltramiOp& op, Complex w, Complex xi);

/// Same with Phi given directly.
Complex eval_B_at(double p, KConvention convention, Complex phi, Complex xi);

struct EllipticityReport {
  double p = 0.0;
  std::uint64_t seed = 0;
  long long samples = 0;
  long long rejected_coincident = 0;
  double tolerance = 1e-10;
  /// |B(z) - B(x)| / |z - x| <= max{V(|z|), V(|x|)}.
  long long violations_39 = 0;
  double worst_margin_39 = 0.0;
  /// |B(z) - B(x)| / |z - x| <= (A(t) + A(s)) / (t + s).
  long long violations_39_first = 0;
  double worst_margin_39_first = 0.0;
  /// (a - b)(s^2 b - t^2 a) >= 0, normalized by (a + b)(s^2 b + t^2 a).
  long long violations_37 = 0;
  double worst_margin_37 = 0.0;
  /// max over samples of max{V(|z|), V(|x|)}; approaches 1 on degenerate samples.
  double max_lipschitz_bound = 0.0;
  /// Tuples whose F(theta) argmax on the 720-point grid was inspected.
  long long theta_checked = 0;
  long long theta_off_pi = 0;
  long long theta_flat = 0;
  int theta_grid = 720;

  bool passed() const {
    return violations_39 == 0 && violations_39_first == 0 && violations_37 == 0 && theta_off_pi == 0;
  }
};

/// Seeded random tuples (k, |z|, |x|, arg z, arg x, arg Phi); sample i draws
/// from its own substream. k is log-uniform in [1e-2, 1e2] and the moduli are
/// log-uniform over the x-range where V is in [1e-3, 0.999].
EllipticityReport ellipticity_sample(double p, long long n_samples, std::uint64_t seed,
                                     long long theta_samples = 10000);

/// F(theta) = (a^2 t^2 + b^2 s^2 - 2abst cos theta) / (t^2 + s^2 - 2st cos theta).
double ellipticity_F(double a, double b, double t, double s, double theta);

struct BeltramiResidual {
  /// |h_wbar - B(w, h_w)| / |h_w| per triangle; NaN where B was singular.
  std::vector<double> residual;
  double max = 0.0;
  double l2 = 0.0;  ///< area-weighted RMS
  double mean = 0.0;
  /// Same statistics restricted to barycenters with |w| <= 0.9.
  double max_inner = 0.0;
  double l2_inner = 0.0;
  int singular = 0;
};

/// Self-consistency mode: B built from each triangle's own Phi sample.
BeltramiResidual beltrami_residual(const DiskMesh& mesh, const DiscreteMap& map, const HopfField& hopf,
                                   double p, KConvention convention = KConvention::scaled);

/// Cross mode: B built from an externally supplied Phi evaluated at the barycenters.
BeltramiResidual beltrami_residual(const DiskMesh& mesh, const DiscreteMap& map,
                                   const std::function<Complex(Complex)>& Phi, double p,
                                   KConvention convention = KConvention::scaled);

/// Area-weighted least-squares fit of sum_{j <= degree} c_j w^j to the
/// barycenter samples of Phi.
struct HolomorphicFit {
  std::vector<Complex> coeffs;
  double relative_misfit = 0.0;
  Complex operator()(Complex w) const;
};

HolomorphicFit fit_holomorphic(const DiskMesh& mesh, const HopfField& hopf, int degree = 6);

struct AnnulusReport {
  double delta = 0.0;
  int triangles = 0;
  int nondegenerate = 0;
  double sup_mu_eta = 0.0;
  /// max |eta_w| / |h_w|; roundoff-sized values mean g and h coincide.
  double max_rel_eta_w = 0.0;
  /// Bounds that the proof takes as given on the compact set |w| <= 1 - delta.
  double M = 0.0;        ///< sup |Phi_h|
  double epsilon = 0.0;  ///< inf |g_wbar|
  double k_g = 0.0;      ///< sup |mu_g|
  /// Triangles where g also solves h's Beltrami equation within tau |eta_w|.
  int qualifying = 0;
  int inequality_violations = 0;  ///< qualifying triangles with |mu_eta| > max{|mu_g|, |mu_h|}
  double sup_mu_eta_qualifying = 0.0;
};

struct QuasiregularityReport {
  /// "ok", "degenerate: zero difference" or "derivative-degenerate".
  std::string status;
  std::vector<AnnulusReport> annuli;
  double tau = 1e-3;
};

/// eta = g - h; per annulus |w| <= 1 - delta for delta in {0.1, 0.2, 0.4}.
/// Triangles with |eta_w| <= 1e-12 |h_w| are derivative-degenerate and skipped.
/// Throws ErrorKind::mismatch when the maps live on different meshes.
QuasiregularityReport quasiregularity_of_difference(const DiskMesh& mesh, const DiscreteMap& g,
                                                    const DiscreteMap& h, const EnergyProfile& profile,
                                                    double tau = 1e-3);

}  // namespace conformal_lab
