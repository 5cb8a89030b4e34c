#include <doctest.h>

#include <cmath>

#include "conformal_lab/beltrami.hpp"
#include "conformal_lab/distortion.hpp"
#include "conformal_lab/level_curve.hpp"
#include "conformal_lab/minimizer.hpp"
#include "conformal_lab/oracles.hpp"
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

DiscreteMap smooth_map(const DiskMesh& mesh) {
  return sample_map(mesh, [](Complex z) { return z + 0.15 * z * z + Complex(0.05, 0.1) * std::conj(z) * z; });
}

}  // namespace

TEST_CASE("B at a point") {
  CHECK(eval_B_at(2.0, KConvention::scaled, 0.0, {3.0, 1.0}) == Complex(0.0, 0.0));
  CHECK(eval_B_at(2.0, KConvention::scaled, 0.0, 0.0) == Complex(0.0, 0.0));

  const double y =
      test_oracles::bisect([](double t) { return ((t + 1) * t + 100) * t - 100; }, 0.9, 1.0);
  CHECK(std::abs(eval_B_at(2.0, KConvention::scaled, 20.0, 10.0)) == doctest::Approx(y).epsilon(1e-13));

  const Complex phi(0.0, 20.0);
  const Complex xi = std::polar(10.0, 0.3);
  const Complex expected = std::conj(phi) / std::abs(phi) * y * xi / std::abs(xi);
  CHECK(std::abs(eval_B_at(2.0, KConvention::scaled, phi, xi) - expected) < 1e-13);

  // raw convention reads k = |Phi|.
  CHECK(std::abs(eval_B_at(2.0, KConvention::raw, 10.0, 10.0)) == doctest::Approx(y).epsilon(1e-13));

  // p = 1: A_k(x) = k / x, also for x <= sqrt(k).
  CHECK(std::abs(eval_B_at(1.0, KConvention::scaled, 4.0, 1.0)) == doctest::Approx(4.0).epsilon(1e-15));

  CHECK(kind_of([] { eval_B_at(2.0, KConvention::scaled, 1.0, 0.0); }) == ErrorKind::singular_argument);
  CHECK(kind_of([] { eval_B_at(0.5, KConvention::scaled, 1.0, 1.0); }) == ErrorKind::domain);

  const BeltramiOp op{2.0, [](Complex w) { return 20.0 * w; }, KConvention::scaled};
  CHECK(std::abs(eval_B(op, 1.0, 10.0) - eval_B_at(2.0, KConvention::scaled, 20.0, 10.0)) < 1e-15);
  CHECK(op.k_of(20.0) == 10.0);
  CHECK(parse_k_convention(to_string(KConvention::raw)) == KConvention::raw);
  CHECK_THROWS_AS(parse_k_convention("half"), Error);
}

TEST_CASE("ellipticity function") {
  const double a = 0.7, b = 0.2, t = 1.3, s = 0.4;
  for (double th : {0.1, 1.0, 2.0, 3.0}) {
    const double num = a * a * t * t + b * b * s * s - 2 * a * b * s * t * std::cos(th);
    const double den = t * t + s * s - 2 * s * t * std::cos(th);
    CHECK(ellipticity_F(a, b, t, s, th) == doctest::Approx(num / den).epsilon(1e-14));
  }
  CHECK(ellipticity_F(a, b, t, s, test_oracles::kPi) ==
        doctest::Approx((a * t + b * s) * (a * t + b * s) / ((t + s) * (t + s))).epsilon(1e-14));
}

TEST_CASE("sampled ellipticity bounds") {
  for (double p : {1.5, 2.0, 3.0}) {
    CAPTURE(p);
    const EllipticityReport r = ellipticity_sample(p, 20000, 42, 500);
    CHECK(r.samples == 20000);
    CHECK(r.passed());
    CHECK(r.theta_checked == 500);
    CHECK(r.max_lipschitz_bound < 1.0);
    CHECK(r.max_lipschitz_bound > 0.99);
    CHECK(r.worst_margin_39 >= -r.tolerance);
  }
  const EllipticityReport a = ellipticity_sample(2.0, 5000, 7, 100);
  const EllipticityReport b = ellipticity_sample(2.0, 5000, 7, 100);
  const EllipticityReport c = ellipticity_sample(2.0, 5000, 8, 100);
  CHECK(a.worst_margin_39 == b.worst_margin_39);
  CHECK(a.worst_margin_37 == b.worst_margin_37);
  CHECK(a.worst_margin_39 != c.worst_margin_39);
  set_thread_count(4);
  const EllipticityReport d = ellipticity_sample(2.0, 5000, 7, 100);
  set_thread_count(1);
  CHECK(d.worst_margin_39 == a.worst_margin_39);
  CHECK(d.max_lipschitz_bound == a.max_lipschitz_bound);
}

TEST_CASE("self-consistency of the Beltrami residual") {
  const DiskMesh mesh = build_disk_mesh(4);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    CAPTURE(p);
    const DiscreteMap map = smooth_map(mesh);
    const HopfField hopf = hopf_field(mesh, map, power_profile(p));
    const BeltramiResidual r = beltrami_residual(mesh, map, hopf, p);
    CHECK(r.max <= 1e-9);
    CHECK(r.singular == 0);
    CHECK(r.residual.size() == mesh.num_triangles());
  }
  const HopfField id = hopf_field(mesh, identity_map(mesh), power_profile(2.0));
  const BeltramiResidual r = beltrami_residual(mesh, identity_map(mesh), id, 2.0);
  CHECK(r.max == 0.0);
}

TEST_CASE("holomorphic fit") {
  const DiskMesh mesh = build_disk_mesh(4);
  const HopfField f = hopf_field(mesh, linear_map(mesh, 0.5), power_profile(2.0));
  const HolomorphicFit fit = fit_holomorphic(mesh, f);
  REQUIRE(fit.coeffs.size() == 7);
  CHECK(std::abs(fit.coeffs[0] - 5.0 / 3.0) < 1e-12);
  CHECK(fit.relative_misfit < 1e-12);
  CHECK(std::abs(fit(Complex(0.3, 0.2)) - 5.0 / 3.0) < 1e-12);
}

TEST_CASE("cross-mode residual shrinks at p = 2 minimizers") {
  double previous = 1e300;
  for (int level : {4, 5}) {
    const DiskMesh mesh = build_disk_mesh(level);
    MinimizeConfig cfg;
    cfg.grad_tol = 1e-10;
    const MinimizeResult r = minimize(mesh, CircleHomeo::sine(0.3, 2), cfg);
    REQUIRE(r.converged);
    const HopfField hopf = hopf_field(mesh, r.map, power_profile(2.0));
    const HolomorphicFit fit = fit_holomorphic(mesh, hopf);
    const BeltramiResidual cross =
        beltrami_residual(mesh, r.map, [&fit](Complex w) { return fit(w); }, 2.0);
    MESSAGE("level " << level << ": cross-mode l2 " << cross.l2 << ", inner l2 " << cross.l2_inner);
    CHECK(cross.l2 < previous);
    previous = cross.l2;
  }
}

TEST_CASE("quasiregularity of differences") {
  const DiskMesh mesh = build_disk_mesh(4);
  const EnergyProfile a = power_profile(2.0);
  const DiscreteMap h = smooth_map(mesh);

  CHECK(quasiregularity_of_difference(mesh, h, h, a).status == "degenerate: zero difference");

  DiscreteMap shifted = h;
  for (auto& v : shifted.values) v += Complex(0.01, -0.02);
  CHECK(quasiregularity_of_difference(mesh, shifted, h, a).status == "derivative-degenerate");

  // eta = 0.1 z + 0.02 z^2 is holomorphic with eta_w != 0, so mu_eta is only
  // interpolation error.
  const DiscreteMap g = sample_map(mesh, [](Complex z) {
    return z + 0.15 * z * z + Complex(0.05, 0.1) * std::conj(z) * z + 0.1 * z + 0.02 * z * z;
  });
  const QuasiregularityReport q = quasiregularity_of_difference(mesh, g, h, a);
  CHECK(q.status == "ok");
  REQUIRE(q.annuli.size() == 3);
  for (const auto& ann : q.annuli) {
    CHECK(ann.nondegenerate > 0);
    CHECK(ann.sup_mu_eta < 0.1);
    CHECK(ann.triangles >= ann.nondegenerate);
  }
  CHECK(q.annuli[0].triangles > q.annuli[2].triangles);

  // eta = 0.1 z^2 has a critical point at 0, where interpolation error is
  // comparable to eta_w.
  const DiscreteMap c = sample_map(mesh, [](Complex z) {
    return z + 0.15 * z * z + Complex(0.05, 0.1) * std::conj(z) * z + 0.1 * z * z;
  });
  const QuasiregularityReport qc = quasiregularity_of_difference(mesh, c, h, a);
  CHECK(qc.annuli[0].sup_mu_eta > 0.3);

  const DiskMesh other = build_disk_mesh(3);
  CHECK(kind_of([&] { quasiregularity_of_difference(other, identity_map(other), h, a); }) == ErrorKind::mismatch);
}
