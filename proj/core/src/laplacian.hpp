#pragma once

#include <memory>
#include <span>
#include <vector>

#include "conformal_lab/disk_mesh.hpp"

namespace conformal_lab::detail {

/// Cotangent stiffness matrix S (S_ij = -(cot a_ij + cot b_ij) / 2) restricted
/// to interior vertices, factorized once. Real matrix, applied to complex
/// vectors componentwise.
class InteriorLaplacian {
 public:
  explicit InteriorLaplacian(const DiskMesh& mesh);
  ~InteriorLaplacian();
  InteriorLaplacian(InteriorLaplacian&&) noexcept;
  InteriorLaplacian& operator=(InteriorLaplacian&&) noexcept;

  std::size_t size() const;

  /// out = S^-1 rhs, both indexed by interior slot.
  void solve(std::span<const Complex> rhs, std::span<Complex> out) const;

  /// -S_IB g_B for the boundary values stored in `values` (full vertex vector).
  std::vector<Complex> boundary_load(std::span<const Complex> values) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace conformal_lab::detail
