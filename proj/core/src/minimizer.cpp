#include "conformal_lab/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "conformal_lab/distortion.hpp"
#include "conformal_lab/mesh_io.hpp"
#include "conformal_lab/oracles.hpp"
#include "laplacian.hpp"

namespace conformal_lab {

namespace {

struct TriangleState {
  std::vector<double> energy;  // area * A(K) * J
  double min_J = std::numeric_limits<double>::infinity();
  int min_J_triangle = -1;
};

// Energies of all triangles; stops filling energies once some J <= floor.
TriangleState evaluate(const DiskMesh& mesh, std::span<const Complex> values,
                       const EnergyProfile& profile) {
  const std::size_t nt = mesh.num_triangles();
  TriangleState st;
  st.energy.assign(nt, 0.0);
  std::vector<double> jac(nt);
  parallel_for(nt, [&](std::size_t t) {
    const auto [hw, hwb] = triangle_derivs(mesh, static_cast<int>(t), values);
    const double x = std::norm(hw);
    const double y = std::norm(hwb);
    const double J = x - y;
    jac[t] = J;
    if (J > 0.0) st.energy[t] = mesh.area(static_cast<int>(t)) * profile((x + y) / J) * J;
  });
  for (std::size_t t = 0; t < nt; ++t) {
    if (jac[t] < st.min_J) {
      st.min_J = jac[t];
      st.min_J_triangle = static_cast<int>(t);
    }
  }
  return st;
}

std::vector<Complex> gradient_of(const DiskMesh& mesh, std::span<const Complex> values,
                                 const EnergyProfile& profile) {
  const std::size_t nt = mesh.num_triangles();
  std::vector<std::array<Complex, 3>> local(nt);
  parallel_for(nt, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const auto [hw, hwb] = triangle_derivs(mesh, t, values);
    const double x = std::norm(hw);
    const double y = std::norm(hwb);
    const double J = x - y;
    const double K = (x + y) / J;
    const double a = profile(K);
    const double ap = profile.prime(K);
    const double fx = a - 2.0 * y * ap / J;
    const double fy = 2.0 * x * ap / J - a;
    const double w = 2.0 * mesh.area(t);
    const auto& cw = mesh.dw(t);
    const auto& cb = mesh.dwbar(t);
    for (int k = 0; k < 3; ++k) {
      local[ti][k] = w * (fx * hw * std::conj(cw[k]) + fy * hwb * std::conj(cb[k]));
    }
  });
  std::vector<Complex> grad(mesh.num_vertices());
  const auto tris = mesh.triangles();
  parallel_for(grad.size(), [&](std::size_t v) {
    Complex acc = 0.0;
    for (int t : mesh.vertex_triangles(static_cast<int>(v))) {
      const Triangle& tri = tris[t];
      const int k = tri[0] == static_cast<int>(v) ? 0 : (tri[1] == static_cast<int>(v) ? 1 : 2);
      acc += local[t][k];
    }
    grad[v] = acc;
  });
  return grad;
}

double dot(std::span<const Complex> a, std::span<const Complex> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

void require_config(const MinimizeConfig& cfg) {
  if (!(cfg.grad_tol > 0.0)) fail(ErrorKind::domain, "grad_tol must be positive");
  if (cfg.max_iters < 1) fail(ErrorKind::domain, "max_iters must be at least 1");
  if (!(cfg.armijo_c > 0.0 && cfg.armijo_c < 1.0)) fail(ErrorKind::domain, "armijo_c must lie in (0, 1)");
  if (!(cfg.shrink > 0.0 && cfg.shrink < 1.0)) fail(ErrorKind::domain, "shrink must lie in (0, 1)");
  if (!(cfg.jac_floor > 0.0 && cfg.jac_floor < 1.0)) fail(ErrorKind::domain, "jac_floor must lie in (0, 1)");
  if (cfg.lbfgs_memory < 0) fail(ErrorKind::domain, "lbfgs_memory must be nonnegative");
  if (cfg.max_shrinks < 1) fail(ErrorKind::domain, "max_shrinks must be at least 1");
  require_valid_profile(cfg.profile);
}

class Preconditioner_ {
 public:
  Preconditioner_(const DiskMesh& mesh, Preconditioner kind) : mesh_(mesh), kind_(kind) {
    if (kind_ == Preconditioner::laplacian) lap_.emplace(mesh);
  }
  // out = P^-1 in, indexed by interior slot.
  void apply(std::span<const Complex> in, std::span<Complex> out) const {
    if (lap_) {
      lap_->solve(in, out);
      return;
    }
    const auto ids = mesh_.interior_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = in[i] / mesh_.vertex_area(ids[i]);
  }

 private:
  const DiskMesh& mesh_;
  Preconditioner kind_;
  std::optional<detail::InteriorLaplacian> lap_;
};

struct Pair {
  std::vector<Complex> s, y;
  double rho;
};

}  // namespace

std::vector<double> triangle_energies(const DiskMesh& mesh, const DiscreteMap& map,
                                      const EnergyProfile& profile) {
  require_on_mesh(mesh, map);
  auto st = evaluate(mesh, map.values, profile);
  if (!(st.min_J > 0.0)) {
    fail(ErrorKind::inadmissible_map, "J <= 0 on triangle " + std::to_string(st.min_J_triangle));
  }
  return std::move(st.energy);
}

std::vector<Complex> energy_gradient(const DiskMesh& mesh, const DiscreteMap& map,
                                     const EnergyProfile& profile) {
  require_on_mesh(mesh, map);
  const auto st = evaluate(mesh, map.values, profile);
  if (!(st.min_J > 0.0)) {
    fail(ErrorKind::inadmissible_map,
         "energy_gradient needs J > 0; triangle " + std::to_string(st.min_J_triangle) +
             " has J = " + format_double(st.min_J));
  }
  return gradient_of(mesh, map.values, profile);
}

double gradient_norm(const DiskMesh& mesh, std::span<const Complex> gradient) {
  double worst = 0.0;
  for (int v : mesh.interior_ids()) worst = std::max(worst, std::abs(gradient[v]) / mesh.vertex_area(v));
  return worst;
}

DiscreteMap perturbed_start(const DiskMesh& mesh, const DiscreteMap& harmonic, std::uint64_t seed) {
  require_on_mesh(mesh, harmonic);
  Rng rng(substream_seed(seed, "perturbed-init"));
  const double amp = 0.05 * mesh.max_edge_length();
  const auto ids = mesh.interior_ids();
  std::vector<Complex> noise(ids.size());
  for (auto& n : noise) {
    const double re = rng.uniform(-1.0, 1.0);
    const double im = rng.uniform(-1.0, 1.0);
    n = amp * Complex(re, im);
  }
  DiscreteMap out = harmonic;
  double scale = 1.0;
  for (int attempt = 0; attempt < 60; ++attempt, scale *= 0.5) {
    for (std::size_t i = 0; i < ids.size(); ++i) out.values[ids[i]] = harmonic.values[ids[i]] + scale * noise[i];
    if (distortion(mesh, out).min_J > 0.0) return out;
  }
  fail(ErrorKind::init, "perturbed start could not be made feasible");
}

MinimizeResult minimize(const DiskMesh& mesh, const CircleHomeo& h0, const MinimizeConfig& cfg,
                        InitMode init) {
  require_config(cfg);
  DiscreteMap start = harmonic_extension_fem(mesh, h0);
  const auto field = distortion(mesh, start);
  if (!(field.min_J > 0.0)) {
    fail(ErrorKind::init, "harmonic start is infeasible (J = " + format_double(field.min_J) +
                              " on triangle " + std::to_string(field.min_J_triangle) +
                              "); try a finer mesh");
  }
  if (init.kind == InitMode::perturbed) start = perturbed_start(mesh, start, init.seed);
  return minimize_from(mesh, std::move(start), cfg);
}

MinimizeResult minimize_from(const DiskMesh& mesh, DiscreteMap start, const MinimizeConfig& cfg) {
  require_config(cfg);
  require_on_mesh(mesh, start);
  const auto& profile = cfg.profile;
  const auto ids = mesh.interior_ids();
  const std::size_t n = ids.size();

  std::vector<Complex> x = std::move(start.values);
  TriangleState st = evaluate(mesh, x, profile);
  if (!(st.min_J > 0.0)) {
    fail(ErrorKind::init, "start map is infeasible (J = " + format_double(st.min_J) + " on triangle " +
                              std::to_string(st.min_J_triangle) + ")");
  }
  const double floor = cfg.jac_floor * st.min_J;
  double energy = pairwise_sum(st.energy);
  std::vector<Complex> gfull = gradient_of(mesh, x, profile);
  double gnorm = gradient_norm(mesh, gfull);

  auto gather = [&](const std::vector<Complex>& full) {
    std::vector<Complex> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = full[ids[i]];
    return out;
  };
  std::vector<Complex> g = gather(gfull);

  MinimizeResult res;
  res.history.push_back({0, energy, gnorm, st.min_J});

  const Preconditioner_ precond(mesh, cfg.preconditioner);
  std::deque<Pair> memory;
  double gamma = 1.0;
  std::vector<Complex> d(n), q(n), r(n), trial(x);

  auto direction = [&](bool plain) {
    q = g;
    std::vector<double> alphas(memory.size());
    if (!plain) {
      for (std::size_t i = memory.size(); i-- > 0;) {
        alphas[i] = memory[i].rho * dot(memory[i].s, q);
        for (std::size_t j = 0; j < n; ++j) q[j] -= alphas[i] * memory[i].y[j];
      }
    }
    precond.apply(q, r);
    if (!plain) {
      for (auto& v : r) v *= gamma;
      for (std::size_t i = 0; i < memory.size(); ++i) {
        const double beta = memory[i].rho * dot(memory[i].y, r);
        for (std::size_t j = 0; j < n; ++j) r[j] += (alphas[i] - beta) * memory[i].s[j];
      }
    }
    for (std::size_t j = 0; j < n; ++j) d[j] = -r[j];
  };

  int iter = 0;
  while (gnorm > cfg.grad_tol && iter < cfg.max_iters) {
    ++iter;
    bool accepted = false;
    double alpha = 1.0;
    TriangleState next;
    std::vector<Complex> gnext_full;
    for (int round = 0; round < 2 && !accepted; ++round) {
      const bool plain = round == 1 || memory.empty();
      direction(plain);
      double slope = dot(g, d);
      if (!(slope < 0.0)) {
        memory.clear();
        direction(true);
        slope = dot(g, d);
      }
      alpha = 1.0;
      for (int shrinks = 0; shrinks <= cfg.max_shrinks; ++shrinks, alpha *= cfg.shrink) {
        for (std::size_t i = 0; i < n; ++i) trial[ids[i]] = x[ids[i]] + alpha * d[i];
        gnext_full.clear();
        next = evaluate(mesh, trial, profile);
        if (!(next.min_J > floor)) continue;
        std::vector<double> diff(next.energy.size());
        for (std::size_t t = 0; t < diff.size(); ++t) diff[t] = next.energy[t] - st.energy[t];
        const double dE = pairwise_sum(diff);
        if (dE <= cfg.armijo_c * alpha * slope) {
          accepted = true;
        } else if (dE <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(energy)) {
          gnext_full = gradient_of(mesh, trial, profile);
          const auto gn = gather(gnext_full);
          if (dot(gn, d) <= -0.8 * slope) accepted = true;
        }
        if (accepted) break;
      }
      if (!accepted && memory.empty()) break;
      if (!accepted) memory.clear();
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "line search failed after " << cfg.max_shrinks << " consecutive reductions at iteration "
          << iter << " (energy " << format_double(energy) << ", grad_norm " << format_double(gnorm)
          << ", min_J " << format_double(st.min_J) << ")";
      fail(ErrorKind::stall, msg.str());
    }
    if (gnext_full.empty()) gnext_full = gradient_of(mesh, trial, profile);
    std::vector<Complex> gnew = gather(gnext_full);
    Pair pr;
    pr.s.resize(n);
    pr.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pr.s[i] = alpha * d[i];
      pr.y[i] = gnew[i] - g[i];
    }
    const double sy = dot(pr.s, pr.y);
    if (cfg.lbfgs_memory > 0 && sy > 0.0) {
      std::vector<Complex> py(n);
      precond.apply(pr.y, py);
      const double ypy = dot(pr.y, py);
      if (ypy > 0.0) {
        gamma = sy / ypy;
        pr.rho = 1.0 / sy;
        memory.push_back(std::move(pr));
        if (static_cast<int>(memory.size()) > cfg.lbfgs_memory) memory.pop_front();
      }
    }
    x = trial;
    st = std::move(next);
    energy = pairwise_sum(st.energy);
    g = std::move(gnew);
    gnorm = gradient_norm(mesh, gnext_full);
    res.history.push_back({iter, energy, gnorm, st.min_J});
  }

  res.map = DiscreteMap{std::move(x), mesh.id()};
  res.energy = energy;
  res.iterations = iter;
  res.final_grad_norm = gnorm;
  res.min_J = st.min_J;
  res.converged = gnorm <= cfg.grad_tol;
  return res;
}

double linf_distance(const DiscreteMap& a, const DiscreteMap& b) {
  if (a.values.size() != b.values.size() || a.mesh_ref != b.mesh_ref) {
    fail(ErrorKind::mismatch, "maps live on different meshes");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  return worst;
}

UniquenessReport uniqueness_probe(const DiskMesh& mesh, const CircleHomeo& h0,
                                  const MinimizeConfig& cfg, int n_restarts, std::uint64_t seed) {
  if (n_restarts < 2) fail(ErrorKind::domain, "uniqueness_probe needs at least 2 restarts");
  UniquenessReport rep;
  for (int i = 0; i < n_restarts; ++i) {
    if (i == 0) {
      rep.runs.push_back(minimize(mesh, h0, cfg, InitMode::harmonic_start()));
      rep.labels.push_back("harmonic");
    } else {
      const std::uint64_t s = substream_seed(seed, "restart-" + std::to_string(i));
      rep.runs.push_back(minimize(mesh, h0, cfg, InitMode::perturbed_start(s)));
      rep.labels.push_back("perturbed-" + std::to_string(i));
    }
    if (!rep.runs.back().converged) rep.partial = true;
  }
  const std::size_t m = rep.runs.size();
  rep.pairwise_linf.assign(m * m, 0.0);
  double lo = rep.runs[0].energy, hi = rep.runs[0].energy;
  for (std::size_t i = 0; i < m; ++i) {
    lo = std::min(lo, rep.runs[i].energy);
    hi = std::max(hi, rep.runs[i].energy);
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dist = linf_distance(rep.runs[i].map, rep.runs[j].map);
      rep.pairwise_linf[i * m + j] = rep.pairwise_linf[j * m + i] = dist;
      rep.max_pairwise_linf = std::max(rep.max_pairwise_linf, dist);
    }
  }
  rep.energy_spread = hi - lo;
  return rep;
}

}  // namespace conformal_lab
