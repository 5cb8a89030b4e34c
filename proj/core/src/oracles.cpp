#include "conformal_lab/oracles.hpp"

#include <cmath>

#include "laplacian.hpp"

namespace conformal_lab {

DiscreteMap harmonic_extension_fem(const DiskMesh& mesh, const DiscreteMap& boundary) {
  require_on_mesh(mesh, boundary);
  const detail::InteriorLaplacian lap(mesh);
  const auto load = lap.boundary_load(boundary.values);
  std::vector<Complex> inner(load.size());
  lap.solve(load, inner);
  DiscreteMap out = boundary;
  const auto ids = mesh.interior_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) out.values[ids[i]] = inner[i];
  return out;
}

DiscreteMap harmonic_extension_fem(const DiskMesh& mesh, const CircleHomeo& h0) {
  return harmonic_extension_fem(mesh, with_trace(h0, mesh, identity_map(mesh)));
}

DiscreteMap poisson_quadrature(const DiskMesh& mesh, const std::function<Complex(double)>& g,
                               int n_quad) {
  if (n_quad < 256) fail(ErrorKind::domain, "poisson_quadrature needs n_quad >= 256");
  std::vector<Complex> nodes(n_quad), samples(n_quad);
  for (int j = 0; j < n_quad; ++j) {
    const double theta = 2.0 * kPi * j / n_quad;
    nodes[j] = std::polar(1.0, theta);
    samples[j] = g(theta);
  }
  std::vector<Complex> values(mesh.num_vertices());
  const auto pts = mesh.vertices();
  parallel_for(
      values.size(),
      [&](std::size_t v) {
        if (mesh.is_boundary(static_cast<int>(v))) {
          values[v] = g(std::arg(pts[v]));
          return;
        }
        const Complex w = pts[v];
        const double scale = (1.0 - std::norm(w)) / n_quad;
        std::vector<Complex> terms(n_quad);
        for (int j = 0; j < n_quad; ++j) terms[j] = samples[j] * (scale / std::norm(nodes[j] - w));
        values[v] = pairwise_sum(terms);
      },
      16);
  return DiscreteMap{std::move(values), mesh.id()};
}

DiscreteMap poisson_quadrature(const DiskMesh& mesh, const CircleHomeo& h0, int n_quad) {
  return poisson_quadrature(mesh, [&](double theta) { return h0.trace(theta); }, n_quad);
}

Complex mobius_point(Complex a, double alpha, Complex z) {
  if (!(std::abs(a) < 1.0)) fail(ErrorKind::domain, "Mobius parameter needs |a| < 1");
  return std::polar(1.0, alpha) * (z - a) / (1.0 - std::conj(a) * z);
}

DiscreteMap mobius_map(const DiskMesh& mesh, Complex a, double alpha) {
  mobius_point(a, alpha, 0.0);
  return sample_map(mesh, [&](Complex z) { return mobius_point(a, alpha, z); });
}

DiscreteMap rotation_map(const DiskMesh& mesh, double alpha) {
  const Complex r = std::polar(1.0, alpha);
  return sample_map(mesh, [&](Complex z) { return r * z; });
}

DiscreteMap linear_map(const DiskMesh& mesh, Complex c) {
  return sample_map(mesh, [&](Complex z) { return z + c * std::conj(z); });
}

OracleKind parse_oracle_kind(const std::string& name) {
  if (name == "harmonic" || name == "fem" || name == "harmonic_fem") return OracleKind::harmonic_fem;
  if (name == "poisson" || name == "poisson_quadrature") return OracleKind::poisson_quadrature;
  if (name == "mobius") return OracleKind::mobius;
  if (name == "rotation") return OracleKind::rotation;
  if (name == "linear") return OracleKind::linear;
  fail(ErrorKind::parse, "unknown oracle kind '" + name + "'");
}

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::harmonic_fem: return "harmonic_fem";
    case OracleKind::poisson_quadrature: return "poisson_quadrature";
    case OracleKind::mobius: return "mobius";
    case OracleKind::rotation: return "rotation";
    case OracleKind::linear: return "linear";
  }
  return "unknown";
}

}  // namespace conformal_lab
