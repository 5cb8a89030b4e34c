#include "conformal_lab/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conformal_lab/point_location.hpp"

namespace conformal_lab {

TriangleDistortion distortion_of(Complex h_w, Complex h_wbar) {
  TriangleDistortion d;
  d.h_w = h_w;
  d.h_wbar = h_wbar;
  const double x = std::norm(h_w), y = std::norm(h_wbar);
  d.J = x - y;
  d.normsq = x + y;
  if (d.J > 0.0) {
    d.K = d.normsq / d.J;
  } else if (d.J == 0.0) {
    d.K = 1.0;
  } else {
    d.K = std::numeric_limits<double>::infinity();
    d.orientation_reversing = true;
  }
  d.mu = (h_w != Complex(0.0, 0.0)) ? h_wbar / h_w
                                    : Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
  return d;
}

double operator_distortion(Complex mu) {
  const double m = std::abs(mu);
  if (!(m < 1.0)) return std::numeric_limits<double>::infinity();
  return (1.0 + m) / (1.0 - m);
}

DistortionField distortion(const WirtingerDerivs& derivs) {
  DistortionField f;
  const std::size_t nt = derivs.h_w.size();
  f.cells.resize(nt);
  parallel_for(nt, [&](std::size_t t) { f.cells[t] = distortion_of(derivs.h_w[t], derivs.h_wbar[t]); });
  f.min_J = std::numeric_limits<double>::infinity();
  f.max_K = 1.0;
  for (std::size_t t = 0; t < nt; ++t) {
    if (f.cells[t].J < f.min_J) {
      f.min_J = f.cells[t].J;
      f.min_J_triangle = static_cast<int>(t);
    }
    f.max_K = std::max(f.max_K, f.cells[t].K);
  }
  return f;
}

DistortionField distortion(const DiskMesh& mesh, const DiscreteMap& map) {
  return distortion(wirtinger(mesh, map));
}

namespace {

void require_admissible(const DistortionField& f) {
  if (!f.admissible()) {
    fail(ErrorKind::inadmissible_map,
         "orientation-reversing triangle " + std::to_string(f.min_J_triangle) +
             " (J = " + std::to_string(f.min_J) + ")");
  }
}

template <class Integrand>
double integrate(const DiskMesh& mesh, const DistortionField& f, Integrand&& g) {
  std::vector<double> terms(f.cells.size());
  parallel_for(terms.size(), [&](std::size_t t) { terms[t] = mesh.area(static_cast<int>(t)) * g(f.cells[t]); });
  return pairwise_sum(terms);
}

}  // namespace

double energy_star(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile) {
  const auto f = distortion(mesh, map);
  require_admissible(f);
  return integrate(mesh, f, [&](const TriangleDistortion& c) {
    return c.J == 0.0 ? 0.0 : profile(c.K) * c.J;
  });
}

double energy_plain(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile) {
  const auto f = distortion(mesh, map);
  require_admissible(f);
  return integrate(mesh, f, [&](const TriangleDistortion& c) { return profile(c.K); });
}

double dirichlet_energy(const DiskMesh& mesh, const DiscreteMap& map) {
  const auto f = distortion(mesh, map);
  return integrate(mesh, f, [](const TriangleDistortion& c) { return c.normsq; });
}

namespace {

/// Inverse of the boundary correspondence, linear in angle between the images
/// of consecutive boundary vertices.
class BoundaryInverse {
 public:
  BoundaryInverse(const DiskMesh& mesh, const DiscreteMap& map) : mesh_(mesh), map_(map) {
    const auto ids = mesh.boundary_ids();
    const std::size_t nb = ids.size();
    image_.resize(nb + 1);
    domain_.resize(nb + 1);
    image_[0] = std::arg(map.values[ids[0]]);
    domain_[0] = std::arg(mesh.vertices()[ids[0]]);
    for (std::size_t i = 1; i <= nb; ++i) {
      const int prev = ids[i - 1], cur = ids[i % nb];
      const double dimg = std::arg(map.values[cur] / map.values[prev]);
      const double ddom = std::arg(mesh.vertices()[cur] / mesh.vertices()[prev]);
      if (!(dimg > 0.0)) {
        fail(ErrorKind::coverage, "boundary values are not increasing in angle");
      }
      image_[i] = image_[i - 1] + dimg;
      domain_[i] = domain_[i - 1] + ddom;
    }
    if (std::abs(image_[nb] - image_[0] - 2.0 * kPi) > 1e-9) {
      fail(ErrorKind::coverage, "boundary values do not wind once around the circle");
    }
  }

  Complex operator()(Complex target) const {
    double theta = std::arg(target);
    const double lo = image_.front();
    const double span = image_.back() - lo;
    theta = lo + std::fmod(std::fmod(theta - lo, span) + span, span);
    auto it = std::upper_bound(image_.begin(), image_.end(), theta);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - image_.begin())) - 1;
    k = std::min(k, image_.size() - 2);
    const auto ids = mesh_.boundary_ids();
    for (std::size_t j : {k, k + 1}) {
      const int b = ids[j % ids.size()];
      if (map_.values[b] == target) return mesh_.vertices()[b];
    }
    const double s = (theta - image_[k]) / (image_[k + 1] - image_[k]);
    const double angle = domain_[k] + s * (domain_[k + 1] - domain_[k]);
    return std::polar(1.0, angle);
  }

 private:
  const DiskMesh& mesh_;
  const DiscreteMap& map_;
  std::vector<double> image_;
  std::vector<double> domain_;
};

}  // namespace

DiscreteMap resample_inverse(const DiskMesh& mesh, const DiscreteMap& map, InverseOptions options) {
  require_on_mesh(mesh, map);
  const auto f = distortion(mesh, map);
  if (!f.strictly_admissible()) {
    fail(ErrorKind::inadmissible_map, "inverse needs J > 0 on every triangle (triangle " +
                                          std::to_string(f.min_J_triangle) + ")");
  }
  TriangleLocator image(mesh, map.values);
  std::vector<Complex> inv(mesh.num_vertices());
  std::optional<BoundaryInverse> boundary;
  if (!options.extrapolate) boundary.emplace(mesh, map);

  int hint = -1;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const Complex target = mesh.vertices()[v];
    if (boundary && mesh.is_boundary(static_cast<int>(v))) {
      inv[v] = (*boundary)(target);
      continue;
    }
    auto hit = image.locate(target, hint);
    if (!hit) {
      if (!options.extrapolate) {
        fail(ErrorKind::coverage, "vertex " + std::to_string(v) +
                                      " is not covered by the image of the map");
      }
      hit = image.nearest(target);
    }
    hint = hit->triangle;
    inv[v] = TriangleLocator::interpolate(mesh, *hit, mesh.vertices());
  }
  return DiscreteMap{std::move(inv), mesh.id()};
}

double duality_gap(const DiskMesh& mesh, const DiscreteMap& map, const EnergyProfile& profile,
                   InverseOptions options) {
  return duality_report(mesh, map, profile, options).duality_gap;
}

DualityReport duality_report(const DiskMesh& mesh, const DiscreteMap& map,
                             const EnergyProfile& profile, InverseOptions options) {
  DualityReport r;
  const auto field = distortion(mesh, map);
  r.energy_star = energy_star(mesh, map, profile);
  const auto inverse = resample_inverse(mesh, map, options);
  r.energy_plain_of_inverse = energy_plain(mesh, inverse, profile);
  r.duality_gap = std::abs(r.energy_star - r.energy_plain_of_inverse) / r.energy_star;
  r.min_J = field.min_J;
  r.max_K = field.max_K;
  std::vector<double> ks;
  ks.reserve(field.cells.size());
  for (const auto& c : field.cells) ks.push_back(c.K);
  std::sort(ks.begin(), ks.end());
  for (double q : {0.5, 0.9, 0.99, 1.0}) {
    const auto idx = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(ks.size() - 1), std::ceil(q * ks.size()) - 1));
    r.K_quantiles.emplace_back(q, ks[idx]);
  }
  return r;
}

}  // namespace conformal_lab
