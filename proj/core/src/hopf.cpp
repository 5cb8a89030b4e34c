#include "conformal_lab/hopf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conformal_lab/distortion.hpp"

namespace conformal_lab {

HopfField hopf_field(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile) {
  require_on_mesh(mesh, map);
  const auto field = distortion(mesh, map);
  if (!field.admissible()) {
    fail(ErrorKind::inadmissible_map, "hopf_field needs J >= 0; triangle " +
                                          std::to_string(field.min_J_triangle) + " has J < 0");
  }
  const std::size_t nt = mesh.num_triangles();
  HopfField out;
  out.Phi.resize(nt);
  out.barycenter.resize(nt);
  parallel_for(nt, [&](std::size_t t) {
    const auto& c = field.cells[t];
    out.barycenter[t] = mesh.barycenter(static_cast<int>(t));
    out.Phi[t] = c.h_wbar == Complex(0.0) ? Complex(0.0)
                                          : profile.prime(c.K) * c.h_w * std::conj(c.h_wbar);
  });

  const auto ids = mesh.interior_ids();
  out.cr_residual.resize(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const auto star = mesh.vertex_triangles(ids[i]);
    double wsum = 0.0;
    Complex dmean = 0.0, phimean = 0.0;
    for (int t : star) {
      const double w = mesh.area(t);
      wsum += w;
      dmean += w * out.barycenter[t];
      phimean += w * out.Phi[t];
    }
    dmean /= wsum;
    phimean /= wsum;
    double dd = 0.0;
    Complex dphi = 0.0;
    for (int t : star) {
      const double w = mesh.area(t);
      const Complex d = out.barycenter[t] - dmean;
      dd += w * std::norm(d);
      dphi += w * std::conj(d) * out.Phi[t];
    }
    const Complex b = dphi / dd;
    double misfit = 0.0, scale = 0.0;
    for (int t : star) {
      const double w = mesh.area(t);
      misfit += w * std::norm(phimean + b * (out.barycenter[t] - dmean) - out.Phi[t]);
      scale += w * std::norm(out.Phi[t]);
    }
    out.cr_residual[i] = std::sqrt(misfit / wsum) / (std::sqrt(scale / wsum) + 1e-14);
  });

  std::vector<double> l1(ids.size()), l2(ids.size()), wts(ids.size());
  double mx = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double w = mesh.vertex_area(ids[i]);
    wts[i] = w;
    l1[i] = w * out.cr_residual[i];
    l2[i] = w * out.cr_residual[i] * out.cr_residual[i];
    mx = std::max(mx, out.cr_residual[i]);
  }
  const double W = pairwise_sum(wts);
  out.summary.L1_residual = W > 0.0 ? pairwise_sum(l1) / W : 0.0;
  out.summary.L2_residual = W > 0.0 ? std::sqrt(pairwise_sum(l2) / W) : 0.0;
  out.summary.max_residual = mx;
  out.summary.refinement_level = mesh.refinement_level();
  return out;
}

double identity_check_26(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile) {
  require_on_mesh(mesh, map);
  const auto field = distortion(mesh, map);
  double worst = 0.0;
  for (const auto& c : field.cells) {
    if (!(c.J > 0.0)) continue;
    const double ap = profile.prime(c.K);
    const Complex lhs = ap * c.h_w * std::conj(c.h_wbar);
    const Complex mu = c.h_wbar / c.h_w;
    const Complex rhs = c.K * ap * c.J * std::conj(mu) / (1.0 + std::norm(mu));
    const double size = std::max(std::abs(lhs), std::abs(rhs));
    if (size > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / size);
  }
  return worst;
}

LowerBoundReport hopf_lower_bound(const DiskMesh& mesh, const DiscreteMap& map,
                                  const EnergyProfile& profile, double relative_slack) {
  require_on_mesh(mesh, map);
  const auto field = distortion(mesh, map);
  LowerBoundReport rep;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& c : field.cells) {
    if (!(c.J > 0.0)) continue;
    const double m = std::abs(c.mu);
    if (!(m >= 0.5)) continue;
    ++rep.triangles_checked;
    const double ap = profile.prime(c.K);
    const double a = profile(c.K);
    const double phi = std::abs(ap * c.h_w * std::conj(c.h_wbar));
    const double lhs = phi * (1.0 + m * m) / m;
    const double mid = c.K * ap * c.J;
    rep.identity_max_rel_error = std::max(rep.identity_max_rel_error, std::abs(lhs - mid) / mid);
    if (mid < profile.p * a * c.J * (1.0 - relative_slack)) ++rep.growth_violations;
    if (a < c.K * (1.0 - relative_slack)) ++rep.floor_violations;
    min_ratio = std::min(min_ratio, phi / (std::pow(c.K, profile.p) * c.J));
  }
  rep.min_phi_over_KpJ = rep.triangles_checked > 0 ? min_ratio : 0.0;
  return rep;
}

double lipschitz_witness(const DiskMesh& mesh, const DiscreteMap& map, double radius) {
  const auto d = wirtinger(mesh, map);
  double worst = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (std::abs(mesh.barycenter(static_cast<int>(t))) > radius) continue;
    worst = std::max(worst, std::abs(d.h_w[t]) + std::abs(d.h_wbar[t]));
  }
  return worst;
}

}  // namespace conformal_lab
