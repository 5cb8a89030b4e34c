#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "conformal_lab/common.hpp"

namespace conformal_lab {

using Triangle = std::array<int, 3>;

inline constexpr int kMaxRefinementLevel = 10;

/// Triangulation of the closed unit disk.
///
/// Vertices are complex points with |v| <= 1. Triangles are counterclockwise
/// index triples. Boundary vertices lie on the unit circle and are listed in
/// counterclockwise order. Construction validates every invariant and caches
/// the per-triangle geometry that the rest of the library reuses: areas,
/// the affine-to-Wirtinger coefficients and adjacency.
class DiskMesh {
 public:
  DiskMesh(std::vector<Complex> vertices, std::vector<Triangle> triangles,
           std::vector<int> boundary_ids, int refinement_level);

  std::span<const Complex> vertices() const { return vertices_; }
  std::span<const Triangle> triangles() const { return triangles_; }
  std::span<const int> boundary_ids() const { return boundary_ids_; }
  int refinement_level() const { return refinement_level_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }

  /// Content fingerprint; DiscreteMap carries it as its mesh reference.
  std::uint64_t id() const { return id_; }

  bool is_boundary(int v) const { return boundary_flag_[v] != 0; }
  /// Interior vertices in increasing index order.
  std::span<const int> interior_ids() const { return interior_ids_; }
  /// Position of a vertex in interior_ids(), or -1 for boundary vertices.
  int interior_slot(int v) const { return interior_slot_[v]; }

  double area(int t) const { return areas_[t]; }
  std::span<const double> areas() const { return areas_; }
  double total_area() const { return total_area_; }
  Complex barycenter(int t) const;

  /// h_w = sum_k dw(t)[k] * h_k and h_wbar = sum_k dwbar(t)[k] * h_k for the
  /// affine interpolant of vertex values h_k on triangle t.
  const std::array<Complex, 3>& dw(int t) const { return dw_[t]; }
  const std::array<Complex, 3>& dwbar(int t) const { return dwbar_[t]; }

  /// Edge vectors w1 - w0, w2 - w0 and D = Im(d1 conj(d2) - d2 conj(d1)).
  struct EdgeFrame {
    Complex d1, d2;
    double det;
  };
  const EdgeFrame& frame(int t) const { return frames_[t]; }

  /// Triangle across the edge opposite local vertex k, or -1 on the boundary.
  const std::array<int, 3>& neighbors(int t) const { return neighbors_[t]; }

  /// Triangles incident to vertex v, in increasing triangle order.
  std::span<const int> vertex_triangles(int v) const;

  /// One third of the area of the incident triangles.
  double vertex_area(int v) const { return vertex_area_[v]; }

  double max_edge_length() const;
  double min_edge_length() const;

 private:
  void build_derived();

  std::vector<Complex> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<int> boundary_ids_;
  int refinement_level_ = 0;

  std::uint64_t id_ = 0;
  std::vector<char> boundary_flag_;
  std::vector<int> interior_ids_;
  std::vector<int> interior_slot_;
  std::vector<double> areas_;
  double total_area_ = 0.0;
  std::vector<std::array<Complex, 3>> dw_;
  std::vector<std::array<Complex, 3>> dwbar_;
  std::vector<EdgeFrame> frames_;
  std::vector<std::array<int, 3>> neighbors_;
  std::vector<int> vt_offsets_;
  std::vector<int> vt_items_;
  std::vector<double> vertex_area_;
};

/// Hexagonal fan (level 0) refined `level` times by 1-to-4 splits, with
/// boundary edge midpoints pushed out to the unit circle.
DiskMesh build_disk_mesh(int level);

/// Piecewise-linear map of the disk: one value per mesh vertex.
struct DiscreteMap {
  std::vector<Complex> values;
  std::uint64_t mesh_ref = 0;
};

DiscreteMap make_map(const DiskMesh& mesh, std::vector<Complex> values);

/// Samples f at every vertex.
template <class F>
DiscreteMap sample_map(const DiskMesh& mesh, F&& f) {
  std::vector<Complex> values(mesh.num_vertices());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(mesh.vertices()[i]);
  return DiscreteMap{std::move(values), mesh.id()};
}

DiscreteMap identity_map(const DiskMesh& mesh);

/// Throws ErrorKind::mismatch unless map lives on mesh.
void require_on_mesh(const DiskMesh& mesh, const DiscreteMap& map);

/// Per-triangle constants of the affine interpolant.
struct WirtingerDerivs {
  std::vector<Complex> h_w;
  std::vector<Complex> h_wbar;
};

WirtingerDerivs wirtinger(const DiskMesh& mesh, const DiscreteMap& map);

/// Wirtinger derivatives of the affine interpolant of `values` on triangle t.
///
/// Solves h_j - h_0 = h_w d_j + h_wbar conj(d_j) (j = 1, 2) by Cramer's rule
/// with the determinant formed exactly like the numerators, so the identity
/// map gives (1, 0) bit-exactly.
inline std::pair<Complex, Complex> triangle_derivs(const DiskMesh& mesh, int t,
                                                   std::span<const Complex> values) {
  const Triangle& tri = mesh.triangles()[t];
  const auto& f = mesh.frame(t);
  const Complex e1 = values[tri[1]] - values[tri[0]];
  const Complex e2 = values[tri[2]] - values[tri[0]];
  const Complex num_w = e1 * std::conj(f.d2) - e2 * std::conj(f.d1);
  const Complex num_wb = f.d1 * e2 - f.d2 * e1;
  // x / (i D) = (Im x - i Re x) / D
  return {Complex(num_w.imag() / f.det, -num_w.real() / f.det),
          Complex(num_wb.imag() / f.det, -num_wb.real() / f.det)};
}

/// Signed area of the triangle (a, b, c); positive when counterclockwise.
inline double signed_area(Complex a, Complex b, Complex c) {
  return 0.5 * ((b.real() - a.real()) * (c.imag() - a.imag()) -
                (c.real() - a.real()) * (b.imag() - a.imag()));
}

}  // namespace conformal_lab
