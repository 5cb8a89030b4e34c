#include "conformal_lab/point_location.hpp"

#include <algorithm>
#include <cmath>

namespace conformal_lab {

TriangleLocator::TriangleLocator(const DiskMesh& topology, std::span<const Complex> positions,
                                 double tolerance)
    : mesh_(topology), pos_(positions), tol_(tolerance) {
  if (positions.size() != topology.num_vertices()) {
    fail(ErrorKind::mismatch, "locator positions do not match mesh vertex count");
  }
}

std::array<double, 3> TriangleLocator::barycentric(int t, Complex p) const {
  const Triangle& tri = mesh_.triangles()[t];
  const Complex a = pos_[tri[0]], b = pos_[tri[1]], c = pos_[tri[2]];
  const double total = signed_area(a, b, c);
  const double l0 = signed_area(p, b, c) / total;
  const double l1 = signed_area(a, p, c) / total;
  return {l0, l1, 1.0 - l0 - l1};
}

std::optional<TriangleLocator::Hit> TriangleLocator::locate(Complex p, int hint) const {
  const int nt = static_cast<int>(mesh_.num_triangles());
  int t = (hint >= 0 && hint < nt) ? hint : 0;
  const int max_steps = 4 * static_cast<int>(std::sqrt(static_cast<double>(nt))) + 64;
  for (int step = 0; step < max_steps; ++step) {
    const auto bary = barycentric(t, p);
    const int worst = static_cast<int>(std::min_element(bary.begin(), bary.end()) - bary.begin());
    if (bary[worst] >= -tol_) return Hit{t, bary};
    const int next = mesh_.neighbors(t)[worst];
    if (next < 0) break;
    t = next;
  }
  for (int s = 0; s < nt; ++s) {
    const auto bary = barycentric(s, p);
    if (*std::min_element(bary.begin(), bary.end()) >= -tol_) return Hit{s, bary};
  }
  return std::nullopt;
}

TriangleLocator::Hit TriangleLocator::nearest(Complex p) const {
  Hit best;
  double best_score = -INFINITY;
  for (int s = 0; s < static_cast<int>(mesh_.num_triangles()); ++s) {
    const auto bary = barycentric(s, p);
    const double score = *std::min_element(bary.begin(), bary.end());
    if (score > best_score) {
      best_score = score;
      best = Hit{s, bary};
    }
  }
  return best;
}

Complex TriangleLocator::interpolate(const DiskMesh& topology, const Hit& hit,
                                     std::span<const Complex> values) {
  const Triangle& tri = topology.triangles()[hit.triangle];
  return hit.bary[0] * values[tri[0]] + hit.bary[1] * values[tri[1]] +
         hit.bary[2] * values[tri[2]];
}

}  // namespace conformal_lab
