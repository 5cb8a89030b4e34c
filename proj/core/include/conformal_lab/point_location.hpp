#pragma once

#include <array>
#include <optional>
#include <span>

#include "conformal_lab/disk_mesh.hpp"

namespace conformal_lab {

/// Point location in a triangulation that shares a DiskMesh's connectivity
/// but has its own vertex positions (e.g. the image of a map).
///
/// Walks across edges from a hint triangle and falls back to a linear scan.
class TriangleLocator {
 public:
  struct Hit {
    int triangle = -1;
    std::array<double, 3> bary{};
  };

  /// `positions` must outlive the locator and give every triangle positive area.
  TriangleLocator(const DiskMesh& topology, std::span<const Complex> positions,
                  double tolerance = 1e-12);

  std::optional<Hit> locate(Complex p, int hint = -1) const;

  /// Triangle whose barycentric coordinates of p are least negative; used
  /// for extrapolation outside the covered region.
  Hit nearest(Complex p) const;

  std::array<double, 3> barycentric(int t, Complex p) const;

  /// Evaluates the affine interpolant of `values` at a located point.
  static Complex interpolate(const DiskMesh& topology, const Hit& hit,
                             std::span<const Complex> values);

 private:
  const DiskMesh& mesh_;
  std::span<const Complex> pos_;
  double tol_;
};

}  // namespace conformal_lab
