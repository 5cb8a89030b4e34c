#include "conformal_lab/mesh_io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace conformal_lab {

std::string format_double(double x) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

void expect_header(std::istream& in, const char* magic) {
  std::string word, version;
  if (!(in >> word >> version) || word != magic || version != "v1") {
    fail(ErrorKind::parse, std::string("expected header '") + magic + " v1'");
  }
}

template <class T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) fail(ErrorKind::parse, std::string("truncated file while reading ") + what);
  return v;
}

int infer_level(std::size_t nb) {
  if (nb % 6 != 0) return 0;
  const std::size_t q = nb / 6;
  if (!std::has_single_bit(q)) return 0;
  return std::countr_zero(q);
}

}  // namespace

void write_mesh(std::ostream& out, const DiskMesh& mesh) {
  out << "diskmesh v1 " << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' '
      << mesh.boundary_ids().size() << '\n';
  for (const Complex& v : mesh.vertices()) {
    out << format_double(v.real()) << ' ' << format_double(v.imag()) << '\n';
  }
  for (const Triangle& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (int b : mesh.boundary_ids()) out << b << '\n';
}

DiskMesh read_mesh(std::istream& in) {
  expect_header(in, "diskmesh");
  const auto nv = read_value<long long>(in, "vertex count");
  const auto nt = read_value<long long>(in, "triangle count");
  const auto nb = read_value<long long>(in, "boundary count");
  if (nv <= 0 || nt <= 0 || nb <= 0) fail(ErrorKind::parse, "nonpositive counts in mesh header");
  std::vector<Complex> verts(static_cast<std::size_t>(nv));
  for (auto& v : verts) {
    const double x = read_value<double>(in, "vertex");
    const double y = read_value<double>(in, "vertex");
    v = Complex(x, y);
  }
  std::vector<Triangle> tris(static_cast<std::size_t>(nt));
  for (auto& t : tris) {
    for (int& k : t) k = read_value<int>(in, "triangle");
  }
  std::vector<int> boundary(static_cast<std::size_t>(nb));
  for (int& b : boundary) b = read_value<int>(in, "boundary index");
  const int level = infer_level(boundary.size());
  return DiskMesh(std::move(verts), std::move(tris), std::move(boundary), level);
}

void write_map(std::ostream& out, const DiscreteMap& map) {
  out << "diskmap v1 " << map.values.size() << '\n';
  for (const Complex& v : map.values) {
    out << format_double(v.real()) << ' ' << format_double(v.imag()) << '\n';
  }
}

DiscreteMap read_map(std::istream& in, const DiskMesh& mesh) {
  expect_header(in, "diskmap");
  const auto nv = read_value<long long>(in, "vertex count");
  if (nv != static_cast<long long>(mesh.num_vertices())) {
    fail(ErrorKind::mismatch, "map file has " + std::to_string(nv) + " values, mesh has " +
                                  std::to_string(mesh.num_vertices()) + " vertices");
  }
  std::vector<Complex> values(static_cast<std::size_t>(nv));
  for (auto& v : values) {
    const double re = read_value<double>(in, "value");
    const double im = read_value<double>(in, "value");
    v = Complex(re, im);
  }
  return make_map(mesh, std::move(values));
}

void save_mesh(const std::string& path, const DiskMesh& mesh) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parse, "cannot write " + path);
  write_mesh(out, mesh);
}

DiskMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::parse, "cannot read " + path);
  return read_mesh(in);
}

void save_map(const std::string& path, const DiscreteMap& map) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parse, "cannot write " + path);
  write_map(out, map);
}

DiscreteMap load_map(const std::string& path, const DiskMesh& mesh) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::parse, "cannot read " + path);
  return read_map(in, mesh);
}

}  // namespace conformal_lab
