#pragma once

#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/energy_profile.hpp"
#include "conformal_lab/test_field.hpp"

namespace conformal_lab {

/// h o g^t with g^t = id + t phi, sampled at the vertices by locating
/// v + t phi(v) in the mesh and interpolating h affinely.
DiscreteMap compose_with_flow(const DiskMesh& mesh, const DiscreteMap& map, const TestField& phi,
                              double t);

struct InnerVariation {
  /// [E*(h o g^t) - E*(h o g^-t)] / 2t at t = step.
  double derivative = 0.0;
  /// Same at t = step / 2.
  double derivative_half = 0.0;
  /// (4 derivative_half - derivative) / 3.
  double richardson = 0.0;
  /// <grad E*, v> with v the area-averaged velocity Dh . phi at each vertex.
  double predicted = 0.0;
  double energy = 0.0;
};

/// Throws ErrorKind::composition if some composed map has J <= 0.
InnerVariation inner_variation_derivative(const DiskMesh& mesh, const DiscreteMap& map,
                                          const EnergyProfile& profile, const TestField& phi,
                                          double step = 1e-4);

struct WeakFormResult {
  Complex lhs;
  Complex rhs;
  /// sum_t area_t (|lhs integrand| + |rhs integrand|): the size of the terms being cancelled.
  double scale = 0.0;
  /// |lhs - rhs| / (scale + 1e-300).
  double residual = 0.0;
};

/// Coefficient of the phi_zbar term of the inner-variation equation of the inverse map.
enum class InnerFormConvention {
  /// 2 K A'(K) conj(mu) / (1 + |mu|^2), the first variation of sum area A(K).
  derived,
  /// 2 p K A'(K) conj(mu) / (1 + |mu|^2).
  verbatim,
};

/// int c(K, mu) phi_zbar  =  int A(K) phi_z  on the (resampled inverse) map f.
/// Throws ErrorKind::inadmissible_map unless every J > 0.
WeakFormResult weak_form_15_residual(const DiskMesh& mesh, const DiscreteMap& inverse_map,
                                     const EnergyProfile& profile, const TestField& phi,
                                     InnerFormConvention convention = InnerFormConvention::derived);

enum class OuterFormConvention {
  /// int K^{p-1}((K+1)p - K) h_wbar phi_w = int K^{p-1}((K-1)p - K) h_w phi_wbar,
  /// the first variation of E*_p under h -> h + t conj(phi).
  euler_lagrange,
  /// int K^p((K+1)p - 1) h_wbar phi_w = int K^p((K-1)p - 1) h_w phi_wbar.
  verbatim,
};

/// Throws ErrorKind::unsupported_profile for custom profiles and
/// ErrorKind::inadmissible_map unless every J > 0.
WeakFormResult weak_form_18_residual(const DiskMesh& mesh, const DiscreteMap& map,
                                     const EnergyProfile& profile, const TestField& phi,
                                     OuterFormConvention convention = OuterFormConvention::euler_lagrange);

}  // namespace conformal_lab
