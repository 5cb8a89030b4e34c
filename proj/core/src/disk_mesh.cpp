#include "conformal_lab/disk_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>

namespace conformal_lab {

namespace {

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

}  // namespace

DiskMesh::DiskMesh(std::vector<Complex> vertices, std::vector<Triangle> triangles,
                   std::vector<int> boundary_ids, int refinement_level)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      boundary_ids_(std::move(boundary_ids)),
      refinement_level_(refinement_level) {
  build_derived();
}

void DiskMesh::build_derived() {
  const int nv = static_cast<int>(vertices_.size());
  const int nt = static_cast<int>(triangles_.size());
  if (nv == 0 || nt == 0 || boundary_ids_.size() < 3) {
    fail(ErrorKind::geometry, "mesh needs vertices, triangles and at least 3 boundary vertices");
  }
  if (refinement_level_ < 0) fail(ErrorKind::geometry, "negative refinement level");

  boundary_flag_.assign(nv, 0);
  for (int b : boundary_ids_) {
    if (b < 0 || b >= nv) fail(ErrorKind::geometry, "boundary index out of range");
    if (boundary_flag_[b]) fail(ErrorKind::geometry, "repeated boundary index");
    boundary_flag_[b] = 1;
    if (std::abs(std::abs(vertices_[b]) - 1.0) > 1e-12) {
      fail(ErrorKind::geometry, "boundary vertex " + std::to_string(b) + " is off the unit circle");
    }
  }
  interior_slot_.assign(nv, -1);
  interior_ids_.clear();
  for (int v = 0; v < nv; ++v) {
    if (boundary_flag_[v]) continue;
    if (!(std::abs(vertices_[v]) < 1.0)) {
      fail(ErrorKind::geometry, "interior vertex " + std::to_string(v) + " is not inside the disk");
    }
    interior_slot_[v] = static_cast<int>(interior_ids_.size());
    interior_ids_.push_back(v);
  }

  areas_.resize(nt);
  dw_.resize(nt);
  dwbar_.resize(nt);
  frames_.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const Triangle& tri = triangles_[t];
    for (int k : tri) {
      if (k < 0 || k >= nv) fail(ErrorKind::geometry, "triangle index out of range");
    }
    const Complex w0 = vertices_[tri[0]], w1 = vertices_[tri[1]], w2 = vertices_[tri[2]];
    const double a = signed_area(w0, w1, w2);
    if (!(a > 0.0)) {
      fail(ErrorKind::geometry, "triangle " + std::to_string(t) + " has nonpositive signed area");
    }
    areas_[t] = a;
    const Complex d1 = w1 - w0, d2 = w2 - w0;
    const double det = (d1 * std::conj(d2) - d2 * std::conj(d1)).imag();
    frames_[t] = EdgeFrame{d1, d2, det};
    const Complex inv = Complex(0.0, -1.0) / det;  // 1 / (i det)
    const Complex a1 = std::conj(d2) * inv, a2 = -std::conj(d1) * inv;
    const Complex b1 = -d2 * inv, b2 = d1 * inv;
    dw_[t] = {-(a1 + a2), a1, a2};
    dwbar_[t] = {-(b1 + b2), b1, b2};
  }
  total_area_ = pairwise_sum(areas_);

  // Adjacency and edge-manifold check.
  std::unordered_map<std::uint64_t, std::pair<int, int>> first_side;
  first_side.reserve(static_cast<std::size_t>(nt) * 2);
  neighbors_.assign(nt, {-1, -1, -1});
  std::unordered_map<std::uint64_t, int> use_count;
  use_count.reserve(static_cast<std::size_t>(nt) * 2);
  for (int t = 0; t < nt; ++t) {
    for (int k = 0; k < 3; ++k) {
      const int a = triangles_[t][(k + 1) % 3];
      const int b = triangles_[t][(k + 2) % 3];
      const auto key = edge_key(a, b);
      const int uses = ++use_count[key];
      if (uses > 2) fail(ErrorKind::geometry, "edge shared by more than two triangles");
      auto it = first_side.find(key);
      if (it == first_side.end()) {
        first_side.emplace(key, std::make_pair(t, k));
      } else {
        neighbors_[t][k] = it->second.first;
        neighbors_[it->second.first][it->second.second] = t;
      }
    }
  }
  std::size_t boundary_edges = 0;
  for (const auto& [key, uses] : use_count) {
    if (uses != 1) continue;
    ++boundary_edges;
    const int a = static_cast<int>(key & 0xffffffffULL);
    const int b = static_cast<int>(key >> 32);
    if (!boundary_flag_[a] || !boundary_flag_[b]) {
      fail(ErrorKind::geometry, "open edge between non-boundary vertices");
    }
  }
  const std::size_t nb = boundary_ids_.size();
  if (boundary_edges != nb) fail(ErrorKind::geometry, "boundary is not a single closed loop");
  for (std::size_t i = 0; i < nb; ++i) {
    const auto key = edge_key(boundary_ids_[i], boundary_ids_[(i + 1) % nb]);
    auto it = use_count.find(key);
    if (it == use_count.end() || it->second != 1) {
      fail(ErrorKind::geometry, "consecutive boundary ids are not joined by a boundary edge");
    }
    const double turn = std::arg(vertices_[boundary_ids_[(i + 1) % nb]] / vertices_[boundary_ids_[i]]);
    if (!(turn > 0.0)) fail(ErrorKind::geometry, "boundary ids are not counterclockwise");
  }

  // Vertex -> triangle incidence (CSR, increasing triangle order).
  vt_offsets_.assign(nv + 1, 0);
  for (const auto& tri : triangles_) {
    for (int k : tri) ++vt_offsets_[k + 1];
  }
  for (int v = 0; v < nv; ++v) vt_offsets_[v + 1] += vt_offsets_[v];
  vt_items_.assign(vt_offsets_.back(), 0);
  std::vector<int> fill(vt_offsets_.begin(), vt_offsets_.end() - 1);
  for (int t = 0; t < nt; ++t) {
    for (int k : triangles_[t]) vt_items_[fill[k]++] = t;
  }
  vertex_area_.assign(nv, 0.0);
  for (int v = 0; v < nv; ++v) {
    double s = 0.0;
    for (int t : vertex_triangles(v)) s += areas_[t];
    vertex_area_[v] = s / 3.0;
  }

  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv_bytes(h, vertices_.data(), vertices_.size() * sizeof(Complex));
  h = fnv_bytes(h, triangles_.data(), triangles_.size() * sizeof(Triangle));
  h = fnv_bytes(h, boundary_ids_.data(), boundary_ids_.size() * sizeof(int));
  id_ = h;
}

Complex DiskMesh::barycenter(int t) const {
  const Triangle& tri = triangles_[t];
  return (vertices_[tri[0]] + vertices_[tri[1]] + vertices_[tri[2]]) / 3.0;
}

std::span<const int> DiskMesh::vertex_triangles(int v) const {
  return std::span<const int>(vt_items_.data() + vt_offsets_[v],
                              static_cast<std::size_t>(vt_offsets_[v + 1] - vt_offsets_[v]));
}

double DiskMesh::max_edge_length() const {
  double m = 0.0;
  for (const auto& tri : triangles_) {
    for (int k = 0; k < 3; ++k) {
      m = std::max(m, std::abs(vertices_[tri[k]] - vertices_[tri[(k + 1) % 3]]));
    }
  }
  return m;
}

double DiskMesh::min_edge_length() const {
  double m = INFINITY;
  for (const auto& tri : triangles_) {
    for (int k = 0; k < 3; ++k) {
      m = std::min(m, std::abs(vertices_[tri[k]] - vertices_[tri[(k + 1) % 3]]));
    }
  }
  return m;
}

DiskMesh build_disk_mesh(int level) {
  if (level < 0 || level > kMaxRefinementLevel) {
    fail(ErrorKind::bounds, "refinement level " + std::to_string(level) + " outside [0, " +
                                std::to_string(kMaxRefinementLevel) + "]");
  }
  std::vector<Complex> verts{Complex(0.0, 0.0)};
  std::vector<Triangle> tris;
  std::vector<int> boundary;
  for (int k = 0; k < 6; ++k) {
    verts.push_back(std::polar(1.0, k * kPi / 3.0));
    boundary.push_back(k + 1);
  }
  // Exact values at the axis crossings keep the fan symmetric.
  verts[1] = Complex(1.0, 0.0);
  verts[4] = Complex(-1.0, 0.0);
  for (int k = 0; k < 6; ++k) tris.push_back({0, 1 + k, 1 + (k + 1) % 6});

  for (int l = 0; l < level; ++l) {
    std::vector<char> on_circle(verts.size(), 0);
    for (int b : boundary) on_circle[b] = 1;

    std::map<std::uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Complex m = 0.5 * (verts[a] + verts[b]);
      if (on_circle[a] && on_circle[b]) m /= std::abs(m);
      verts.push_back(m);
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({ab, t[1], bc});
      next.push_back({ca, bc, t[2]});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);

    std::vector<int> refined;
    refined.reserve(boundary.size() * 2);
    for (std::size_t i = 0; i < boundary.size(); ++i) {
      refined.push_back(boundary[i]);
      refined.push_back(midpoint.at(edge_key(boundary[i], boundary[(i + 1) % boundary.size()])));
    }
    boundary = std::move(refined);
  }
  return DiskMesh(std::move(verts), std::move(tris), std::move(boundary), level);
}

DiscreteMap make_map(const DiskMesh& mesh, std::vector<Complex> values) {
  if (values.size() != mesh.num_vertices()) {
    fail(ErrorKind::mismatch, "map has " + std::to_string(values.size()) + " values for a mesh with " +
                                  std::to_string(mesh.num_vertices()) + " vertices");
  }
  return DiscreteMap{std::move(values), mesh.id()};
}

DiscreteMap identity_map(const DiskMesh& mesh) {
  return DiscreteMap{std::vector<Complex>(mesh.vertices().begin(), mesh.vertices().end()), mesh.id()};
}

void require_on_mesh(const DiskMesh& mesh, const DiscreteMap& map) {
  if (map.values.size() != mesh.num_vertices() || map.mesh_ref != mesh.id()) {
    fail(ErrorKind::mismatch, "map does not live on this mesh");
  }
}

WirtingerDerivs wirtinger(const DiskMesh& mesh, const DiscreteMap& map) {
  require_on_mesh(mesh, map);
  const std::size_t nt = mesh.num_triangles();
  WirtingerDerivs d{std::vector<Complex>(nt), std::vector<Complex>(nt)};
  parallel_for(nt, [&](std::size_t t) {
    auto [hw, hwb] = triangle_derivs(mesh, static_cast<int>(t), map.values);
    d.h_w[t] = hw;
    d.h_wbar[t] = hwb;
  });
  return d;
}

}  // namespace conformal_lab
