#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "conformal_lab/disk_mesh.hpp"

namespace conformal_lab {

/// Orientation-preserving degree-one homeomorphism of the circle, written as a
/// lift phi with phi(theta + 2 pi) = phi(theta) + 2 pi.
///
/// Only closed-form families are supported, each with a closed-form
/// positivity certificate for phi'. Compositions apply stages left to right.
class CircleHomeo {
 public:
  struct Sine {
    double eps = 0.0;
    int m = 1;
  };
  struct Rotation {
    double alpha = 0.0;
  };
  struct Mobius {
    Complex a;
    double alpha = 0.0;
  };
  using Stage = std::variant<Sine, Rotation, Mobius>;

  /// theta + eps sin(m theta). Throws ErrorKind::not_homeomorphism unless |eps| m < 1.
  static CircleHomeo sine(double eps, int m);
  static CircleHomeo rotation(double alpha);
  /// Boundary trace of z -> e^{i alpha} (z - a) / (1 - conj(a) z). Throws
  /// ErrorKind::domain unless |a| < 1.
  static CircleHomeo mobius(Complex a, double alpha = 0.0);
  static CircleHomeo identity() { return rotation(0.0); }
  /// then(first, second) = second o first.
  static CircleHomeo then(const CircleHomeo& first, const CircleHomeo& second);

  double operator()(double theta) const;
  double derivative(double theta) const;
  /// phi(theta + t) - phi(theta), evaluated without cancellation where the
  /// family allows it.
  double increment(double theta, double t) const;
  /// e^{i phi(theta)}.
  Complex trace(double theta) const;

  /// Quasisymmetry quotient sup |phi(theta+t) - phi(theta)| / |phi(theta) - phi(theta-t)|
  /// (and its reciprocal) over a kModulusGrid-point grid of theta and dyadic t.
  double modulus() const { return modulus_; }

  const std::vector<Stage>& stages() const { return stages_; }
  /// Canonical textual form accepted by parse_boundary.
  std::string spec() const;

  static constexpr int kModulusGrid = 4096;

 private:
  explicit CircleHomeo(std::vector<Stage> stages);
  double estimate_modulus() const;

  std::vector<Stage> stages_;
  double modulus_ = 1.0;
};

/// Parses "sine:eps=0.3,m=1", "rot:alpha=0.7", "mobius:a=0.3+0.1i[,alpha=..]",
/// "identity", and compositions joined by '>' (applied left to right).
/// Throws ErrorKind::parse on malformed text.
CircleHomeo parse_boundary(std::string_view text);

/// Parses "0.3+0.1i", "-0.2i", "0.5".
Complex parse_complex(std::string_view text);

/// e^{i phi(theta_j)} for every boundary vertex, in boundary_ids() order.
std::vector<Complex> trace_on_mesh(const CircleHomeo& h0, const DiskMesh& mesh);

/// Copy of `map` with the boundary vertices overwritten by the trace of h0.
DiscreteMap with_trace(const CircleHomeo& h0, const DiskMesh& mesh, DiscreteMap map);

}  // namespace conformal_lab
