#pragma once

#include <utility>
#include <vector>

#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/energy_profile.hpp"

namespace conformal_lab {

/// Pointwise quantities of one triangle, with the norm convention
/// |Dh|^2 = |h_w|^2 + |h_wbar|^2.
struct TriangleDistortion {
  Complex h_w;
  Complex h_wbar;
  double J = 0.0;       ///< |h_w|^2 - |h_wbar|^2
  double normsq = 0.0;  ///< |h_w|^2 + |h_wbar|^2
  double K = 1.0;       ///< normsq / J; 1 where J == 0; +inf where J < 0
  Complex mu;           ///< h_wbar / h_w; NaN where h_w == 0
  bool orientation_reversing = false;
};

TriangleDistortion distortion_of(Complex h_w, Complex h_wbar);

/// Operator-norm distortion (1 + |mu|) / (1 - |mu|); +inf for |mu| >= 1.
double operator_distortion(Complex mu);

struct DistortionField {
  std::vector<TriangleDistortion> cells;
  double min_J = 0.0;
  int min_J_triangle = -1;
  double max_K = 1.0;

  bool admissible() const { return min_J >= 0.0; }
  bool strictly_admissible() const { return min_J > 0.0; }
};

DistortionField distortion(const WirtingerDerivs& derivs);
DistortionField distortion(const DiskMesh& mesh, const DiscreteMap& map);

/// Sum over triangles of area * A(K) * J. Throws ErrorKind::inadmissible_map
/// when some J < 0, naming the worst triangle.
double energy_star(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile);

/// Sum over triangles of area * A(K).
double energy_plain(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile);

/// Sum over triangles of area * (|h_w|^2 + |h_wbar|^2).
double dirichlet_energy(const DiskMesh& mesh, const DiscreteMap& map);

struct InverseOptions {
  /// Use the affine inverse of the closest image triangle for vertices the
  /// image does not cover, and for boundary vertices. Needed for maps that
  /// are not self-maps of the disk (e.g. real-linear maps); off by default.
  bool extrapolate = false;
};

/// Vertex-sampled inverse on the same mesh. Interior vertices are located in
/// the image triangulation and pulled back through that triangle's affine
/// map; boundary vertices invert the piecewise-linear-in-angle boundary
/// correspondence. Throws ErrorKind::coverage when a vertex is not covered.
DiscreteMap resample_inverse(const DiskMesh& mesh, const DiscreteMap& map,
                             InverseOptions options = {});

/// |E*(h) - E(h^-1)| / E*(h) with h^-1 from resample_inverse.
double duality_gap(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile,
                   InverseOptions options = {});

struct DualityReport {
  double energy_star = 0.0;
  double energy_plain_of_inverse = 0.0;
  double duality_gap = 0.0;
  double min_J = 0.0;
  double max_K = 1.0;
  /// (q, K_q) for q in {0.5, 0.9, 0.99, 1.0}.
  std::vector<std::pair<double, double>> K_quantiles;
};

DualityReport duality_report(const DiskMesh& mesh, const DiscreteMap& map,
                             const EnergyProfile& profile, InverseOptions options = {});

}  // namespace conformal_lab
