#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <utility>

#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/mesh_io.hpp"
#include "oracles.hpp"

using namespace conformal_lab;

namespace {

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::bounds;
}

std::size_t edge_count(const DiskMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : mesh.triangles()) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return edges.size();
}

}  // namespace

TEST_CASE("level 0 is the hexagonal fan") {
  const DiskMesh mesh = build_disk_mesh(0);
  CHECK(mesh.num_vertices() == 7);
  CHECK(mesh.num_triangles() == 6);
  CHECK(mesh.boundary_ids().size() == 6);
  CHECK(mesh.interior_ids().size() == 1);
}

TEST_CASE("level 1 counts") {
  const DiskMesh mesh = build_disk_mesh(1);
  CHECK(mesh.num_vertices() == 19);
  CHECK(mesh.num_triangles() == 24);
  CHECK(mesh.boundary_ids().size() == 12);
}

TEST_CASE("counts follow the subdivision recurrence") {
  for (int level = 0; level < 6; ++level) {
    const DiskMesh a = build_disk_mesh(level);
    const DiskMesh b = build_disk_mesh(level + 1);
    CHECK(b.num_vertices() == a.num_vertices() + edge_count(a));
    CHECK(b.num_triangles() == 4 * a.num_triangles());
    CHECK(b.boundary_ids().size() == 2 * a.boundary_ids().size());
    CHECK(b.refinement_level() == level + 1);
  }
}

TEST_CASE("total area equals the inscribed polygon") {
  double previous = 0.0;
  for (int level = 0; level <= 7; ++level) {
    const DiskMesh mesh = build_disk_mesh(level);
    const int n = static_cast<int>(mesh.boundary_ids().size());
    CHECK(mesh.total_area() == doctest::Approx(test_oracles::inscribed_polygon_area(n)).epsilon(1e-13));
    std::vector<Complex> boundary;
    for (int v : mesh.boundary_ids()) boundary.push_back(mesh.vertices()[v]);
    CHECK(test_oracles::shoelace(boundary) == doctest::Approx(mesh.total_area()).epsilon(1e-13));
    CHECK(mesh.total_area() > previous);
    CHECK(mesh.total_area() < test_oracles::kPi);
    previous = mesh.total_area();
  }
  CHECK(test_oracles::kPi - previous < 1e-3);
}

TEST_CASE("geometry invariants") {
  const DiskMesh mesh = build_disk_mesh(4);
  double area_sum = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const double a = signed_area(mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]);
    CHECK(a > 0.0);
    CHECK(mesh.area(static_cast<int>(t)) == doctest::Approx(a).epsilon(1e-14));
    for (int k = 0; k < 3; ++k) {
      const int n = mesh.neighbors(static_cast<int>(t))[k];
      if (n < 0) continue;
      const auto& back = mesh.neighbors(n);
      CHECK((back[0] == static_cast<int>(t) || back[1] == static_cast<int>(t) ||
             back[2] == static_cast<int>(t)));
    }
  }
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    CHECK(std::abs(mesh.vertices()[v]) <= 1.0 + 1e-15);
    area_sum += mesh.vertex_area(static_cast<int>(v));
  }
  CHECK(area_sum == doctest::Approx(mesh.total_area()).epsilon(1e-13));

  double last = -1.0;
  bool wrapped = false;
  for (int v : mesh.boundary_ids()) {
    CHECK(mesh.is_boundary(v));
    CHECK(std::abs(std::abs(mesh.vertices()[v]) - 1.0) < 1e-15);
    double angle = std::arg(mesh.vertices()[v]);
    if (angle < 0) angle += 2 * test_oracles::kPi;
    if (angle < last) {
      CHECK_FALSE(wrapped);
      wrapped = true;
    }
    last = angle;
  }
  for (int v : mesh.interior_ids()) CHECK_FALSE(mesh.is_boundary(v));
}

TEST_CASE("refinement level out of range") {
  CHECK(kind_of([] { build_disk_mesh(-1); }) == ErrorKind::bounds);
  CHECK(kind_of([] { build_disk_mesh(kMaxRefinementLevel + 1); }) == ErrorKind::bounds);
}

TEST_CASE("wirtinger derivatives of affine maps") {
  const DiskMesh mesh = build_disk_mesh(3);
  SUBCASE("identity is exact") {
    const WirtingerDerivs d = wirtinger(mesh, identity_map(mesh));
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      CHECK(d.h_w[t] == Complex(1.0, 0.0));
      CHECK(d.h_wbar[t] == Complex(0.0, 0.0));
    }
  }
  SUBCASE("z + 0.5 conj(z)") {
    const WirtingerDerivs d = wirtinger(mesh, sample_map(mesh, [](Complex z) { return z + 0.5 * std::conj(z); }));
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      CHECK(std::abs(d.h_w[t] - 1.0) < 1e-14);
      CHECK(std::abs(d.h_wbar[t] - 0.5) < 1e-14);
    }
  }
  SUBCASE("conj(z)") {
    const WirtingerDerivs d = wirtinger(mesh, sample_map(mesh, [](Complex z) { return std::conj(z); }));
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      CHECK(std::abs(d.h_w[t]) < 1e-14);
      CHECK(std::abs(d.h_wbar[t] - 1.0) < 1e-14);
    }
  }
  SUBCASE("agrees with the real Jacobian on a nonlinear map") {
    const auto f = [](Complex z) { return z * z * 0.3 + std::conj(z) * Complex(0.1, 0.2) + z; };
    const DiscreteMap map = sample_map(mesh, f);
    const WirtingerDerivs d = wirtinger(mesh, map);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles()[t];
      const auto [hw, hwb] = test_oracles::affine_wirtinger(
          mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]], map.values[tri[0]],
          map.values[tri[1]], map.values[tri[2]]);
      CHECK(std::abs(d.h_w[t] - hw) < 1e-12);
      CHECK(std::abs(d.h_wbar[t] - hwb) < 1e-12);
    }
  }
}

TEST_CASE("maps are tied to their mesh") {
  const DiskMesh a = build_disk_mesh(2);
  const DiskMesh b = build_disk_mesh(3);
  CHECK(kind_of([&] { wirtinger(b, identity_map(a)); }) == ErrorKind::mismatch);
  CHECK(kind_of([&] { make_map(a, std::vector<Complex>(3)); }) == ErrorKind::mismatch);
}

TEST_CASE("mesh and map files round-trip bit-exactly") {
  const DiskMesh mesh = build_disk_mesh(3);
  std::stringstream ms;
  write_mesh(ms, mesh);
  const DiskMesh back = read_mesh(ms);
  CHECK(back.id() == mesh.id());
  CHECK(back.refinement_level() == 3);

  const DiscreteMap map = sample_map(mesh, [](Complex z) { return z * Complex(0.1, 1.0 / 3.0) + z * z / 7.0; });
  std::stringstream ps;
  write_map(ps, map);
  const DiscreteMap map_back = read_map(ps, back);
  REQUIRE(map_back.values.size() == map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i) CHECK(map_back.values[i] == map.values[i]);

  std::stringstream again;
  write_map(again, map_back);
  std::stringstream first;
  write_map(first, map);
  CHECK(again.str() == first.str());
}

TEST_CASE("malformed files are parse errors") {
  std::stringstream bad("diskmesh v1 7 6");
  CHECK(kind_of([&] { read_mesh(bad); }) == ErrorKind::parse);
  std::stringstream wrong("diskmap v1 3\n0 0\n");
  CHECK(kind_of([&] { read_mesh(wrong); }) == ErrorKind::parse);
}

TEST_CASE("format_double round-trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
  }
}
