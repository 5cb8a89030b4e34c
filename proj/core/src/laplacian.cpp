#include "laplacian.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace conformal_lab::detail {

struct InteriorLaplacian::Impl {
  Eigen::SparseMatrix<double> interior;
  // Rows: interior slot, columns: vertex id (boundary columns only).
  Eigen::SparseMatrix<double, Eigen::RowMajor> coupling;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  const DiskMesh* mesh = nullptr;
};

InteriorLaplacian::InteriorLaplacian(const DiskMesh& mesh) : impl_(std::make_unique<Impl>()) {
  impl_->mesh = &mesh;
  const auto n = static_cast<Eigen::Index>(mesh.interior_ids().size());
  std::vector<Eigen::Triplet<double>> inner, cross;
  const auto tris = mesh.triangles();
  const auto pts = mesh.vertices();
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const Triangle& tri = tris[t];
    for (int k = 0; k < 3; ++k) {
      const int i = tri[(k + 1) % 3];
      const int j = tri[(k + 2) % 3];
      const Complex u = pts[i] - pts[tri[k]];
      const Complex v = pts[j] - pts[tri[k]];
      const double cot = (u.real() * v.real() + u.imag() * v.imag()) /
                         (u.real() * v.imag() - u.imag() * v.real());
      const double w = 0.5 * cot;
      const int si = mesh.interior_slot(i);
      const int sj = mesh.interior_slot(j);
      if (si >= 0) inner.emplace_back(si, si, w);
      if (sj >= 0) inner.emplace_back(sj, sj, w);
      if (si >= 0 && sj >= 0) {
        inner.emplace_back(si, sj, -w);
        inner.emplace_back(sj, si, -w);
      } else if (si >= 0) {
        cross.emplace_back(si, j, -w);
      } else if (sj >= 0) {
        cross.emplace_back(sj, i, -w);
      }
    }
  }
  impl_->interior.resize(n, n);
  impl_->interior.setFromTriplets(inner.begin(), inner.end());
  impl_->coupling.resize(n, static_cast<Eigen::Index>(mesh.num_vertices()));
  impl_->coupling.setFromTriplets(cross.begin(), cross.end());
  if (n > 0) {
    impl_->ldlt.compute(impl_->interior);
    if (impl_->ldlt.info() != Eigen::Success) {
      fail(ErrorKind::solver, "cotangent Laplacian factorization failed (degenerate mesh?)");
    }
  }
}

InteriorLaplacian::~InteriorLaplacian() = default;
InteriorLaplacian::InteriorLaplacian(InteriorLaplacian&&) noexcept = default;
InteriorLaplacian& InteriorLaplacian::operator=(InteriorLaplacian&&) noexcept = default;

std::size_t InteriorLaplacian::size() const { return static_cast<std::size_t>(impl_->interior.rows()); }

void InteriorLaplacian::solve(std::span<const Complex> rhs, std::span<Complex> out) const {
  const auto n = impl_->interior.rows();
  if (n == 0) return;
  Eigen::MatrixXd b(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i, 0) = rhs[i].real();
    b(i, 1) = rhs[i].imag();
  }
  const Eigen::MatrixXd x = impl_->ldlt.solve(b);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = Complex(x(i, 0), x(i, 1));
}

std::vector<Complex> InteriorLaplacian::boundary_load(std::span<const Complex> values) const {
  const auto& c = impl_->coupling;
  std::vector<Complex> load(static_cast<std::size_t>(c.rows()));
  for (Eigen::Index r = 0; r < c.outerSize(); ++r) {
    Complex acc = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(c, r); it; ++it) {
      acc -= it.value() * values[it.col()];
    }
    load[r] = acc;
  }
  return load;
}

}  // namespace conformal_lab::detail
