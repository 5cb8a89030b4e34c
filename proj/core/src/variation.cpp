#include "conformal_lab/variation.hpp"

#include <cmath>

#include "conformal_lab/distortion.hpp"
#include "conformal_lab/minimizer.hpp"
#include "conformal_lab/point_location.hpp"

namespace conformal_lab {

DiscreteMap compose_with_flow(const DiskMesh& mesh, const DiscreteMap& map, const TestField& phi,
                              double t) {
  require_on_mesh(mesh, map);
  if (phi.values.size() != mesh.num_vertices()) fail(ErrorKind::mismatch, "test field lives on another mesh");
  const TriangleLocator locator(mesh, mesh.vertices());
  DiscreteMap out = map;
  const auto pts = mesh.vertices();
  for (std::size_t v = 0; v < pts.size(); ++v) {
    if (phi.values[v] == Complex(0.0)) continue;
    const Complex target = pts[v] + t * phi.values[v];
    const int hint = mesh.vertex_triangles(static_cast<int>(v)).front();
    const auto hit = locator.locate(target, hint);
    if (!hit) fail(ErrorKind::composition, "g^t moved a vertex outside the mesh");
    out.values[v] = TriangleLocator::interpolate(mesh, *hit, map.values);
  }
  return out;
}

namespace {

double energy_of_composition(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile,
                             const TestField& phi, double t) {
  const DiscreteMap composed = compose_with_flow(mesh, map, phi, t);
  const auto field = distortion(mesh, composed);
  if (!(field.min_J > 0.0)) {
    fail(ErrorKind::composition, "h o g^t left the feasible set at t = " + std::to_string(t) +
                                     " (triangle " + std::to_string(field.min_J_triangle) + ")");
  }
  return energy_star(mesh, composed, profile);
}

void require_positive_jacobian(const DistortionField& field) {
  if (!(field.min_J > 0.0)) {
    fail(ErrorKind::inadmissible_map,
         "weak form needs J > 0; triangle " + std::to_string(field.min_J_triangle) + " violates it");
  }
}

WeakFormResult finish(std::vector<Complex>& lhs, std::vector<Complex>& rhs, std::vector<double>& mag) {
  WeakFormResult r;
  r.lhs = pairwise_sum(lhs);
  r.rhs = pairwise_sum(rhs);
  r.scale = pairwise_sum(mag);
  r.residual = std::abs(r.lhs - r.rhs) / (r.scale + 1e-300);
  return r;
}

}  // namespace

InnerVariation inner_variation_derivative(const DiskMesh& mesh, const DiscreteMap& map,
                                          const EnergyProfile& profile, const TestField& phi,
                                          double step) {
  if (!(step > 0.0)) fail(ErrorKind::domain, "finite-difference step must be positive");
  InnerVariation out;
  out.energy = energy_star(mesh, map, profile);
  auto central = [&](double t) {
    const double ep = energy_of_composition(mesh, map, profile, phi, t);
    const double em = energy_of_composition(mesh, map, profile, phi, -t);
    return (ep - em) / (2.0 * t);
  };
  out.derivative = central(step);
  out.derivative_half = central(0.5 * step);
  out.richardson = (4.0 * out.derivative_half - out.derivative) / 3.0;

  const auto grad = energy_gradient(mesh, map, profile);
  const auto derivs = wirtinger(mesh, map);
  double acc = 0.0;
  for (int v : mesh.interior_ids()) {
    const Complex ph = phi.values[v];
    if (ph == Complex(0.0)) continue;
    Complex vel = 0.0;
    double wsum = 0.0;
    for (int t : mesh.vertex_triangles(v)) {
      vel += mesh.area(t) * (derivs.h_w[t] * ph + derivs.h_wbar[t] * std::conj(ph));
      wsum += mesh.area(t);
    }
    vel /= wsum;
    acc += grad[v].real() * vel.real() + grad[v].imag() * vel.imag();
  }
  out.predicted = acc;
  return out;
}

WeakFormResult weak_form_15_residual(const DiskMesh& mesh, const DiscreteMap& inverse_map,
                                     const EnergyProfile& profile, const TestField& phi,
                                     InnerFormConvention convention) {
  require_on_mesh(mesh, inverse_map);
  const auto field = distortion(mesh, inverse_map);
  require_positive_jacobian(field);
  const double factor = convention == InnerFormConvention::verbatim ? 2.0 * profile.p : 2.0;
  const std::size_t nt = mesh.num_triangles();
  std::vector<Complex> lhs(nt), rhs(nt);
  std::vector<double> mag(nt);
  parallel_for(nt, [&](std::size_t t) {
    const auto& c = field.cells[t];
    const double area = mesh.area(static_cast<int>(t));
    const Complex mu = c.h_w == Complex(0.0) ? Complex(0.0) : c.mu;
    const Complex coef = factor * c.K * profile.prime(c.K) * std::conj(mu) / (1.0 + std::norm(mu));
    lhs[t] = area * coef * phi.avg_wbar[t];
    rhs[t] = area * profile(c.K) * phi.avg_w[t];
    mag[t] = std::abs(lhs[t]) + std::abs(rhs[t]);
  });
  return finish(lhs, rhs, mag);
}

WeakFormResult weak_form_18_residual(const DiskMesh& mesh, const DiscreteMap& map,
                                     const EnergyProfile& profile, const TestField& phi,
                                     OuterFormConvention convention) {
  if (profile.kind != ProfileKind::power) {
    fail(ErrorKind::unsupported_profile, "the outer weak form is stated for A(t) = t^p only");
  }
  require_on_mesh(mesh, map);
  const auto field = distortion(mesh, map);
  require_positive_jacobian(field);
  const double p = profile.p;
  const std::size_t nt = mesh.num_triangles();
  std::vector<Complex> lhs(nt), rhs(nt);
  std::vector<double> mag(nt);
  parallel_for(nt, [&](std::size_t t) {
    const auto& c = field.cells[t];
    const double K = c.K;
    double cl, cr;
    if (convention == OuterFormConvention::euler_lagrange) {
      const double base = std::pow(K, p - 1.0);
      cl = base * ((K + 1.0) * p - K);
      cr = base * ((K - 1.0) * p - K);
    } else {
      const double base = std::pow(K, p);
      cl = base * ((K + 1.0) * p - 1.0);
      cr = base * ((K - 1.0) * p - 1.0);
    }
    const double area = mesh.area(static_cast<int>(t));
    lhs[t] = area * cl * c.h_wbar * phi.avg_w[t];
    rhs[t] = area * cr * c.h_w * phi.avg_wbar[t];
    mag[t] = std::abs(lhs[t]) + std::abs(rhs[t]);
  });
  return finish(lhs, rhs, mag);
}

}  // namespace conformal_lab
