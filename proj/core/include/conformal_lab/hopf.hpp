#pragma once

#include <vector>

#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/energy_profile.hpp"

namespace conformal_lab {

struct HopfSummary {
  /// Vertex-area-weighted mean, root mean square and maximum of cr_residual.
  double L1_residual = 0.0;
  double L2_residual = 0.0;
  double max_residual = 0.0;
  int refinement_level = 0;
};

/// Ahlfors-Hopf differential Phi = A'(K) h_w conj(h_wbar) sampled at triangle
/// barycenters, with a discrete d/dwbar measure at interior vertices.
struct HopfField {
  std::vector<Complex> Phi;         ///< per triangle
  std::vector<Complex> barycenter;  ///< per triangle
  /// Per interior vertex (indexed by interior slot): RMS misfit of the best
  /// complex-linear fit a + b (w - v) to Phi over the vertex star, divided
  /// by the star's RMS |Phi| + 1e-14. Area weights throughout.
  std::vector<double> cr_residual;
  HopfSummary summary;
};

/// Requires J >= 0 everywhere (ErrorKind::inadmissible_map otherwise).
HopfField hopf_field(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile);

/// max over triangles of the relative gap between A'(K) h_w conj(h_wbar) and
/// K A'(K) J conj(mu) / (1 + |mu|^2). Triangles with J <= 0 are skipped.
double identity_check_26(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile);

/// On triangles with |mu| >= 1/2 checks the chain
///   |Phi| (1 + |mu|^2) / |mu| = K A'(K) J >= p A(K) J >= p K J.
struct LowerBoundReport {
  int triangles_checked = 0;
  double identity_max_rel_error = 0.0;
  int growth_violations = 0;  ///< K A'(K) < p A(K)
  int floor_violations = 0;   ///< A(K) < K
  /// min over checked triangles of |Phi| / (K^p J); 0 when none checked.
  double min_phi_over_KpJ = 0.0;
};

LowerBoundReport hopf_lower_bound(const DiskMesh& mesh, const DiscreteMap& map,
                                  const EnergyProfile& profile, double relative_slack = 1e-12);

/// sup of the operator norm |h_w| + |h_wbar| over triangles whose barycenter
/// satisfies |w| <= radius.
double lipschitz_witness(const DiskMesh& mesh, const DiscreteMap& map, double radius = 0.9);

}  // namespace conformal_lab
