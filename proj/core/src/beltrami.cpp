#include "conformal_lab/beltrami.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "conformal_lab/distortion.hpp"
#include "conformal_lab/level_curve.hpp"

namespace conformal_lab {

KConvention parse_k_convention(const std::string& name) {
  if (name == "scaled") return KConvention::scaled;
  if (name == "raw") return KConvention::raw;
  fail(ErrorKind::parse, "k convention must be 'scaled' or 'raw', got '" + name + "'");
}

std::string to_string(KConvention c) { return c == KConvention::scaled ? "scaled" : "raw"; }

double BeltramiOp::k_of(Complex phi) const {
  return convention == KConvention::scaled ? std::abs(phi) / p : std::abs(phi);
}

Complex eval_B_at(double p, KConvention convention, Complex phi, Complex xi) {
  if (!(p >= 1.0)) fail(ErrorKind::domain, "Beltrami operator needs p >= 1");
  if (phi == Complex(0.0)) return 0.0;
  if (xi == Complex(0.0)) fail(ErrorKind::singular_argument, "B(w, 0) is undefined where Phi(w) != 0");
  const double mod = std::abs(phi);
  const double k = convention == KConvention::scaled ? mod / p : mod;
  const double x = std::abs(xi);
  double y;
  if (p == 1.0) {
    y = k / x;
  } else {
    y = *level_solve(p, k, x);
  }
  return std::conj(phi) / mod * (y / x) * xi;
}

Complex eval_B(const BeltramiOp& op, Complex w, Complex xi) {
  return eval_B_at(op.p, op.convention, op.Phi(w), xi);
}

double ellipticity_F(double a, double b, double t, double s, double theta) {
  const double c = std::cos(theta);
  return (a * a * t * t + b * b * s * s - 2.0 * a * b * s * t * c) / (t * t + s * s - 2.0 * s * t * c);
}

namespace {

struct SampleOutcome {
  bool rejected = false;
  double margin_39 = 0.0;
  double margin_39_first = 0.0;
  double margin_37 = 0.0;
  double bound = 0.0;
  int theta = 0;  // 0 unchecked, 1 at pi, 2 flat, 3 off
};

}  // namespace

EllipticityReport ellipticity_sample(double p, long long n_samples, std::uint64_t seed,
                                     long long theta_samples) {
  if (n_samples < 1) fail(ErrorKind::domain, "ellipticity_sample needs n_samples >= 1");
  if (!(p > 1.0)) fail(ErrorKind::domain, "ellipticity_sample needs p > 1");
  EllipticityReport rep;
  rep.p = p;
  rep.seed = seed;
  rep.samples = n_samples;
  rep.worst_margin_39 = rep.worst_margin_39_first = rep.worst_margin_37 =
      std::numeric_limits<double>::infinity();
  const std::uint64_t base = substream_seed(seed, "ellipticity");
  const int grid = rep.theta_grid;

  constexpr long long kBlock = 1 << 16;
  std::vector<SampleOutcome> block;
  for (long long start = 0; start < n_samples; start += kBlock) {
    const long long len = std::min(kBlock, n_samples - start);
    block.assign(static_cast<std::size_t>(len), SampleOutcome{});
    parallel_for(
        static_cast<std::size_t>(len),
        [&](std::size_t j) {
          const long long i = start + static_cast<long long>(j);
          Rng rng(mix64(base + static_cast<std::uint64_t>(i)));
          const double k = std::pow(10.0, rng.uniform(-2.0, 2.0));
          const double lx_lo = std::log(level_x_for_V(p, k, 0.999));
          const double lx_hi = std::log(level_x_for_V(p, k, 1e-3));
          const double t = std::exp(rng.uniform(lx_lo, lx_hi));
          const double s = std::exp(rng.uniform(lx_lo, lx_hi));
          const double arg_z = rng.uniform(0.0, 2.0 * kPi);
          const double arg_x = rng.uniform(0.0, 2.0 * kPi);
          const double arg_phi = rng.uniform(0.0, 2.0 * kPi);
          const Complex zeta = std::polar(t, arg_z);
          const Complex xi = std::polar(s, arg_x);
          SampleOutcome& out = block[j];
          const double gap = std::abs(zeta - xi);
          if (gap <= 1e-12 * (t + s)) {
            out.rejected = true;
            return;
          }
          const Complex phi = std::polar(p * k, arg_phi);
          const Complex bz = eval_B_at(p, KConvention::scaled, phi, zeta);
          const Complex bx = eval_B_at(p, KConvention::scaled, phi, xi);
          const double q = std::abs(bz - bx) / gap;
          const double a = *level_solve(p, k, t) / t;
          const double b = *level_solve(p, k, s) / s;
          out.bound = std::max(a, b);
          out.margin_39 = out.bound - q;
          out.margin_39_first = (a * t + b * s) / (t + s) - q;
          out.margin_37 = (a - b) * (s * s * b - t * t * a) / ((a + b) * (s * s * b + t * t * a));
          if (i < theta_samples) {
            double fmax = -std::numeric_limits<double>::infinity();
            double fmin = std::numeric_limits<double>::infinity();
            int jmax = 0;
            for (int g = 0; g < grid; ++g) {
              const double f = ellipticity_F(a, b, t, s, 2.0 * kPi * g / grid);
              if (f > fmax) {
                fmax = f;
                jmax = g;
              }
              fmin = std::min(fmin, f);
            }
            if (fmax - fmin <= 1e-12 * std::abs(fmax)) {
              out.theta = 2;
            } else {
              out.theta = std::abs(jmax - grid / 2) <= 1 ? 1 : 3;
            }
          }
        },
        256);
    for (const auto& o : block) {
      if (o.rejected) {
        ++rep.rejected_coincident;
        continue;
      }
      rep.worst_margin_39 = std::min(rep.worst_margin_39, o.margin_39);
      rep.worst_margin_39_first = std::min(rep.worst_margin_39_first, o.margin_39_first);
      rep.worst_margin_37 = std::min(rep.worst_margin_37, o.margin_37);
      rep.max_lipschitz_bound = std::max(rep.max_lipschitz_bound, o.bound);
      if (o.margin_39 < -rep.tolerance) ++rep.violations_39;
      if (o.margin_39_first < -rep.tolerance) ++rep.violations_39_first;
      if (o.margin_37 < -rep.tolerance) ++rep.violations_37;
      if (o.theta != 0) ++rep.theta_checked;
      if (o.theta == 2) ++rep.theta_flat;
      if (o.theta == 3) ++rep.theta_off_pi;
    }
  }
  return rep;
}

namespace {

BeltramiResidual summarize(const DiskMesh& mesh, std::vector<double> residual, int singular) {
  BeltramiResidual out;
  out.singular = singular;
  double wsum = 0.0, sq = 0.0, lin = 0.0, wsum_in = 0.0, sq_in = 0.0;
  for (std::size_t t = 0; t < residual.size(); ++t) {
    const double r = residual[t];
    if (std::isnan(r)) continue;
    const double a = mesh.area(static_cast<int>(t));
    wsum += a;
    sq += a * r * r;
    lin += a * r;
    out.max = std::max(out.max, r);
    if (std::abs(mesh.barycenter(static_cast<int>(t))) <= 0.9) {
      wsum_in += a;
      sq_in += a * r * r;
      out.max_inner = std::max(out.max_inner, r);
    }
  }
  out.l2 = wsum > 0.0 ? std::sqrt(sq / wsum) : 0.0;
  out.mean = wsum > 0.0 ? lin / wsum : 0.0;
  out.l2_inner = wsum_in > 0.0 ? std::sqrt(sq_in / wsum_in) : 0.0;
  out.residual = std::move(residual);
  return out;
}

template <class PhiAt>
BeltramiResidual residual_with(const DiskMesh& mesh, const DiscreteMap& map, PhiAt&& phi_at, double p,
                               KConvention convention) {
  const auto d = wirtinger(mesh, map);
  const std::size_t nt = mesh.num_triangles();
  std::vector<double> res(nt);
  std::vector<char> singular(nt, 0);
  parallel_for(nt, [&](std::size_t t) {
    const Complex hw = d.h_w[t];
    const Complex hwb = d.h_wbar[t];
    const Complex phi = phi_at(t);
    if (hw == Complex(0.0)) {
      if (phi != Complex(0.0)) {
        singular[t] = 1;
        res[t] = std::numeric_limits<double>::quiet_NaN();
      } else {
        res[t] = hwb == Complex(0.0) ? 0.0 : std::numeric_limits<double>::infinity();
      }
      return;
    }
    res[t] = std::abs(hwb - eval_B_at(p, convention, phi, hw)) / std::abs(hw);
  });
  int count = 0;
  for (char c : singular) count += c;
  return summarize(mesh, std::move(res), count);
}

}  // namespace

BeltramiResidual beltrami_residual(const DiskMesh& mesh, const DiscreteMap& map, const HopfField& hopf,
                                   double p, KConvention convention) {
  require_on_mesh(mesh, map);
  if (hopf.Phi.size() != mesh.num_triangles()) fail(ErrorKind::mismatch, "Hopf field lives on another mesh");
  return residual_with(mesh, map, [&](std::size_t t) { return hopf.Phi[t]; }, p, convention);
}

BeltramiResidual beltrami_residual(const DiskMesh& mesh, const DiscreteMap& map,
                                   const std::function<Complex(Complex)>& Phi, double p,
                                   KConvention convention) {
  require_on_mesh(mesh, map);
  return residual_with(
      mesh, map, [&](std::size_t t) { return Phi(mesh.barycenter(static_cast<int>(t))); }, p, convention);
}

Complex HolomorphicFit::operator()(Complex w) const {
  Complex acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 0;) acc = acc * w + coeffs[j];
  return acc;
}

HolomorphicFit fit_holomorphic(const DiskMesh& mesh, const HopfField& hopf, int degree) {
  if (degree < 0) fail(ErrorKind::domain, "fit degree must be nonnegative");
  const auto nt = static_cast<Eigen::Index>(mesh.num_triangles());
  Eigen::MatrixXcd A(nt, degree + 1);
  Eigen::VectorXcd b(nt);
  for (Eigen::Index t = 0; t < nt; ++t) {
    const double w = std::sqrt(mesh.area(static_cast<int>(t)));
    const Complex z = hopf.barycenter[t];
    Complex zj = 1.0;
    for (int j = 0; j <= degree; ++j, zj *= z) A(t, j) = w * zj;
    b(t) = w * hopf.Phi[t];
  }
  const Eigen::VectorXcd c = A.colPivHouseholderQr().solve(b);
  HolomorphicFit fit;
  fit.coeffs.assign(c.data(), c.data() + c.size());
  const double bn = b.norm();
  fit.relative_misfit = bn > 0.0 ? (A * c - b).norm() / bn : 0.0;
  return fit;
}

QuasiregularityReport quasiregularity_of_difference(const DiskMesh& mesh, const DiscreteMap& g,
                                                    const DiscreteMap& h, const EnergyProfile& profile,
                                                    double tau) {
  require_on_mesh(mesh, g);
  require_on_mesh(mesh, h);
  if (profile.kind != ProfileKind::power) {
    fail(ErrorKind::unsupported_profile, "the Beltrami operator is defined for A(t) = t^p only");
  }
  QuasiregularityReport rep;
  rep.tau = tau;
  const double p = profile.p;

  bool all_zero = true;
  for (std::size_t v = 0; v < g.values.size(); ++v) {
    if (g.values[v] != h.values[v]) {
      all_zero = false;
      break;
    }
  }
  const auto dg = wirtinger(mesh, g);
  const auto dh = wirtinger(mesh, h);
  const auto fh = distortion(dh);
  const std::size_t nt = mesh.num_triangles();

  std::vector<char> degenerate(nt);
  bool any_nondegenerate = false;
  for (std::size_t t = 0; t < nt; ++t) {
    const Complex ew = dg.h_w[t] - dh.h_w[t];
    degenerate[t] = std::abs(ew) <= 1e-12 * std::abs(dh.h_w[t]);
    if (!degenerate[t]) any_nondegenerate = true;
  }
  rep.status = all_zero ? "degenerate: zero difference" : (any_nondegenerate ? "ok" : "derivative-degenerate");

  for (double delta : {0.1, 0.2, 0.4}) {
    AnnulusReport a;
    a.delta = delta;
    a.epsilon = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < nt; ++t) {
      if (std::abs(mesh.barycenter(static_cast<int>(t))) > 1.0 - delta) continue;
      ++a.triangles;
      const auto& ch = fh.cells[t];
      const Complex phi = ch.h_wbar == Complex(0.0)
                              ? Complex(0.0)
                              : profile.prime(ch.K) * ch.h_w * std::conj(ch.h_wbar);
      const double mug = std::abs(dg.h_wbar[t]) / std::abs(dg.h_w[t]);
      const double muh = std::abs(dh.h_wbar[t]) / std::abs(dh.h_w[t]);
      a.M = std::max(a.M, std::abs(phi));
      a.epsilon = std::min(a.epsilon, std::abs(dg.h_wbar[t]));
      a.k_g = std::max(a.k_g, mug);
      a.max_rel_eta_w = std::max(a.max_rel_eta_w, std::abs(dg.h_w[t] - dh.h_w[t]) / std::abs(dh.h_w[t]));
      if (degenerate[t] || all_zero) continue;
      ++a.nondegenerate;
      const Complex ew = dg.h_w[t] - dh.h_w[t];
      const Complex ewb = dg.h_wbar[t] - dh.h_wbar[t];
      const double mu_eta = std::abs(ewb) / std::abs(ew);
      a.sup_mu_eta = std::max(a.sup_mu_eta, mu_eta);
      bool qualifies = false;
      try {
        const Complex bg = eval_B_at(p, KConvention::scaled, phi, dg.h_w[t]);
        qualifies = std::abs(dg.h_wbar[t] - bg) <= tau * std::abs(ew);
      } catch (const Error&) {
        qualifies = false;
      }
      if (qualifies) {
        ++a.qualifying;
        a.sup_mu_eta_qualifying = std::max(a.sup_mu_eta_qualifying, mu_eta);
        if (mu_eta > std::max(mug, muh) + tau) ++a.inequality_violations;
      }
    }
    if (a.triangles == 0) a.epsilon = 0.0;
    rep.annuli.push_back(a);
  }
  return rep;
}

}  // namespace conformal_lab
