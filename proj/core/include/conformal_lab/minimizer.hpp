#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conformal_lab/boundary.hpp"
#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/energy_profile.hpp"

namespace conformal_lab {

enum class Preconditioner {
  /// Cotangent stiffness matrix on interior vertices (default).
  laplacian,
  /// Per-vertex area weights.
  area,
};

struct MinimizeConfig {
  EnergyProfile profile = power_profile(2.0);
  /// Stop when max_v |grad_v| / vertex_area(v) <= grad_tol.
  double grad_tol = 1e-8;
  int max_iters = 20000;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  /// A step is rejected if some triangle has J <= jac_floor * (initial min J).
  double jac_floor = 1e-3;
  std::uint64_t seed = 0;
  int lbfgs_memory = 10;
  Preconditioner preconditioner = Preconditioner::laplacian;
  /// Consecutive backtracking steps before a line search counts as failed.
  int max_shrinks = 40;
};

struct InitMode {
  enum Kind { harmonic, perturbed } kind = harmonic;
  std::uint64_t seed = 0;

  static InitMode harmonic_start() { return {}; }
  static InitMode perturbed_start(std::uint64_t seed) { return {perturbed, seed}; }
};

struct IterateRecord {
  int iter = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double min_J = 0.0;
};

struct MinimizeResult {
  DiscreteMap map;
  double energy = 0.0;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double min_J = 0.0;
  bool converged = false;
  std::vector<IterateRecord> history;
};

/// Per-vertex gradient of sum_t area_t A(K_t) J_t, written as
/// dE/dx + i dE/dy for every vertex (boundary entries included).
/// Throws ErrorKind::inadmissible_map if some J <= 0.
std::vector<Complex> energy_gradient(const DiskMesh& mesh, const DiscreteMap& map,
                                     const EnergyProfile& profile);

/// max over interior vertices of |grad_v| / vertex_area(v).
double gradient_norm(const DiskMesh& mesh, std::span<const Complex> gradient);

/// Per-triangle area * A(K) * J; requires J > 0 everywhere.
std::vector<double> triangle_energies(const DiskMesh& mesh, const DiscreteMap& map,
                                      const EnergyProfile& profile);

/// Feasible descent on the interior values with the trace of h0 held fixed.
/// Throws ErrorKind::init if the start is infeasible and ErrorKind::stall if
/// the line search keeps failing.
MinimizeResult minimize(const DiskMesh& mesh, const CircleHomeo& h0, const MinimizeConfig& cfg,
                        InitMode init = {});

/// Same, starting from an explicit admissible map (its boundary values are used as the trace).
MinimizeResult minimize_from(const DiskMesh& mesh, DiscreteMap start, const MinimizeConfig& cfg);

/// Harmonic start plus seeded noise of amplitude 0.05 * max edge length,
/// halved toward the harmonic start until every J > 0.
DiscreteMap perturbed_start(const DiskMesh& mesh, const DiscreteMap& harmonic, std::uint64_t seed);

struct UniquenessReport {
  std::vector<MinimizeResult> runs;
  std::vector<std::string> labels;
  /// max over pairs of the vertex L-infinity distance.
  double max_pairwise_linf = 0.0;
  /// Full pairwise matrix, row-major, runs.size()^2 entries.
  std::vector<double> pairwise_linf;
  double energy_spread = 0.0;
  /// Some restart did not converge.
  bool partial = false;
};

/// One harmonic start and n_restarts - 1 perturbed starts with seeds drawn
/// from substreams of `seed`. Throws ErrorKind::domain for n_restarts < 2.
UniquenessReport uniqueness_probe(const DiskMesh& mesh, const CircleHomeo& h0,
                                  const MinimizeConfig& cfg, int n_restarts, std::uint64_t seed);

double linf_distance(const DiscreteMap& a, const DiscreteMap& b);

}  // namespace conformal_lab
