#pragma once

#include <cstdint>
#include <vector>

#include "conformal_lab/disk_mesh.hpp"

namespace conformal_lab {

/// Compactly supported test function for the variational diagnostics.
///
/// phi(w) = bump(|w| / (1 - delta)) * P(w) with P a random complex polynomial
/// in w and conj(w) of degree <= 3. `values` are vertex samples (used to build
/// g^t = id + t phi); `avg_w`, `avg_wbar` are exact triangle averages of
/// phi_w and phi_wbar, obtained from the boundary integrals
///   int_T phi_wbar = (1/2i) oint phi dw,   int_T phi_w = -(1/2i) oint phi dwbar
/// with 6-point Gauss-Legendre on every edge.
struct TestField {
  std::vector<Complex> values;
  std::vector<Complex> avg_w;
  std::vector<Complex> avg_wbar;
  double delta = 0.1;
  double grad_bound = 0.4;
  std::uint64_t seed = 0;
};

/// Throws ErrorKind::domain unless 0 < delta < 1/2 and 0 < grad_bound < 1/2.
TestField random_test_field(const DiskMesh& mesh, std::uint64_t seed, double delta = 0.1,
                            double grad_bound = 0.4);

/// max over triangles of |phi_w| + |phi_wbar| for both the vertex interpolant
/// and the exact triangle averages.
double max_gradient(const DiskMesh& mesh, const TestField& phi);

/// phi1 + phi2 (values and averages added).
TestField combine(const TestField& a, const TestField& b);

}  // namespace conformal_lab
