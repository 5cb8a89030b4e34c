#pragma once

#include <functional>
#include <string>

#include "conformal_lab/boundary.hpp"
#include "conformal_lab/disk_mesh.hpp"

namespace conformal_lab {

/// Discrete Dirichlet minimizer with the trace of h0: cotangent-weight
/// Laplace solve for the interior values, each real component separately.
/// Throws ErrorKind::solver if the system cannot be factorized.
DiscreteMap harmonic_extension_fem(const DiskMesh& mesh, const CircleHomeo& h0);

/// Same solve with the boundary values taken from `boundary` (interior entries ignored).
DiscreteMap harmonic_extension_fem(const DiskMesh& mesh, const DiscreteMap& boundary);

/// Poisson integral (1/2pi) int P(w, theta) g(theta) dtheta by the trapezoid
/// rule on n_quad equispaced nodes. Boundary vertices get g at their angle.
/// Throws ErrorKind::domain for n_quad < 256.
DiscreteMap poisson_quadrature(const DiskMesh& mesh, const std::function<Complex(double)>& g,
                               int n_quad);
DiscreteMap poisson_quadrature(const DiskMesh& mesh, const CircleHomeo& h0, int n_quad);

/// z -> e^{i alpha} (z - a) / (1 - conj(a) z). Throws ErrorKind::domain unless |a| < 1.
Complex mobius_point(Complex a, double alpha, Complex z);
DiscreteMap mobius_map(const DiskMesh& mesh, Complex a, double alpha = 0.0);

DiscreteMap rotation_map(const DiskMesh& mesh, double alpha);

/// z -> z + c conj(z).
DiscreteMap linear_map(const DiskMesh& mesh, Complex c);

enum class OracleKind { harmonic_fem, poisson_quadrature, mobius, rotation, linear };

struct OracleMap {
  OracleKind kind = OracleKind::harmonic_fem;
  std::string params;
  DiscreteMap map;
};

OracleKind parse_oracle_kind(const std::string& name);
std::string to_string(OracleKind kind);

}  // namespace conformal_lab
