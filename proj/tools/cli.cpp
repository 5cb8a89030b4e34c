#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "conformal_lab/beltrami.hpp"
#include "conformal_lab/boundary.hpp"
#include "conformal_lab/common.hpp"
#include "conformal_lab/disk_mesh.hpp"
#include "conformal_lab/distortion.hpp"
#include "conformal_lab/energy_profile.hpp"
#include "conformal_lab/hopf.hpp"
#include "conformal_lab/level_curve.hpp"
#include "conformal_lab/mesh_io.hpp"
#include "conformal_lab/minimizer.hpp"
#include "conformal_lab/oracles.hpp"
#include "conformal_lab/test_field.hpp"
#include "conformal_lab/variation.hpp"

namespace conformal_lab::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when the command ran but its outcome is a numerical failure
// (non-convergence, rerun mismatch). Artifacts are still written.
struct NumericalFailure : std::runtime_error {
  NumericalFailure(std::string kind, const std::string& what)
      : std::runtime_error(what), kind(std::move(kind)) {}
  std::string kind;
};

// ---------------------------------------------------------------------------
// Files and hashing
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
  if (!out) throw UsageError("write failed for " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json cjson(Complex z) { return json::array({z.real(), z.imag()}); }

// Non-finite doubles become null in JSON; keep them readable instead.
json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

// ---------------------------------------------------------------------------
// Run context and manifests
// ---------------------------------------------------------------------------

struct Artifact {
  std::string name;
  std::string content;
};

struct Context {
  std::vector<std::string> argv;  // effective command line, config merged
  std::string command;
  json config = json::object();
  int threads = 1;
  std::chrono::steady_clock::time_point start;
  std::string started_at;
  fs::path manifest_path;  // set once a manifest is written
};

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunInfo {
  json seeds = json::object();
  std::optional<int> level;
  std::optional<double> p;
  std::string boundary;
};

json manifest_json(const Context& ctx, const RunInfo& info, const std::vector<Artifact>& artifacts) {
  json m;
  m["version"] = std::string(kVersion);
  m["command"] = ctx.command;
  m["argv"] = ctx.argv;
  m["config"] = ctx.config;
  m["seeds"] = info.seeds;
  m["level"] = info.level ? json(*info.level) : json(nullptr);
  m["profile"] = info.p ? json("power:p=" + format_double(*info.p)) : json(nullptr);
  m["boundary"] = info.boundary.empty() ? json(nullptr) : json(info.boundary);
  m["threads"] = ctx.threads;
  json list = json::array();
  for (const auto& a : artifacts) {
    list.push_back({{"name", a.name},
                    {"bytes", a.content.size()},
                    {"fnv1a64", hex64(fnv1a64(a.content))}});
  }
  m["artifacts"] = std::move(list);
  m["started_at"] = ctx.started_at;
  const auto elapsed = std::chrono::steady_clock::now() - ctx.start;
  m["wall_clock_seconds"] = std::chrono::duration<double>(elapsed).count();
  return m;
}

// Directory output: every artifact plus manifest.json.
void emit_directory(Context& ctx, const fs::path& dir, const RunInfo& info,
                    const std::vector<Artifact>& artifacts) {
  fs::create_directories(dir);
  for (const auto& a : artifacts) write_file(dir / a.name, a.content);
  ctx.manifest_path = dir / "manifest.json";
  write_file(ctx.manifest_path, dump(manifest_json(ctx, info, artifacts)));
}

// Single-file output: the file plus <file>.manifest.json, or stdout.
void emit_file(Context& ctx, const std::string& out, const RunInfo& info, const std::string& content) {
  if (out.empty()) {
    std::cout << content;
    std::cout.flush();
    return;
  }
  const fs::path path(out);
  write_file(path, content);
  ctx.manifest_path = fs::path(out + ".manifest.json");
  write_file(ctx.manifest_path,
             dump(manifest_json(ctx, info, {Artifact{path.filename().string(), content}})));
}

void require_fresh_directory(const fs::path& dir) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw UsageError("output directory " + dir.string() + " already exists and is not empty");
  }
}

// ---------------------------------------------------------------------------
// Option parsing helpers
// ---------------------------------------------------------------------------

Preconditioner parse_preconditioner(const std::string& s) {
  if (s == "laplacian") return Preconditioner::laplacian;
  if (s == "area") return Preconditioner::area;
  throw UsageError("unknown preconditioner '" + s + "'");
}

InnerFormConvention parse_inner_convention(const std::string& s) {
  if (s == "derived") return InnerFormConvention::derived;
  if (s == "verbatim") return InnerFormConvention::verbatim;
  throw UsageError("unknown weak15 convention '" + s + "'");
}

OuterFormConvention parse_outer_convention(const std::string& s) {
  if (s == "euler-lagrange" || s == "el") return OuterFormConvention::euler_lagrange;
  if (s == "verbatim") return OuterFormConvention::verbatim;
  throw UsageError("unknown weak18 convention '" + s + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// "key = value" lines; '#' starts a comment.
std::vector<std::string> config_flags(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::string> flags;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config" || key == "threads") {
      throw UsageError(path.string() + ": '" + key + "' cannot be set from a config file");
    }
    flags.push_back("--" + key + "=" + value);
  }
  return flags;
}

// Removes every occurrence of a single-valued option from args.
std::vector<std::string> strip_option(const std::vector<std::string>& args, const std::string& name,
                                      std::vector<std::string>* values = nullptr) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == name) {
      if (i + 1 >= args.size()) throw UsageError(name + " needs a value");
      if (values) values->push_back(args[i + 1]);
      ++i;
    } else if (args[i].rfind(name + "=", 0) == 0) {
      if (values) values->push_back(args[i].substr(name.size() + 1));
    } else {
      out.push_back(args[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Minimization
// ---------------------------------------------------------------------------

struct MinimizeOpts {
  double p = 2.0;
  int level = 5;
  std::string boundary = "sine:eps=0.3,m=1";
  double tol = 1e-8;
  int max_iter = 20000;
  int restarts = 1;
  std::uint64_t seed = 0;
  std::string init = "harmonic";
  std::string preconditioner = "laplacian";
  double jac_floor = 1e-3;
};

void add_minimize_options(CLI::App* sub, MinimizeOpts& o) {
  sub->add_option("--p", o.p, "Exponent of A(t) = t^p");
  sub->add_option("--level", o.level, "Mesh refinement level")->check(CLI::Range(0, kMaxRefinementLevel));
  sub->add_option("--boundary", o.boundary, "Boundary homeomorphism");
  sub->add_option("--tol", o.tol, "Gradient tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", o.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--restarts", o.restarts, "Number of starts for the uniqueness probe")
      ->check(CLI::Range(1, 64));
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--init", o.init, "Start of the single run")
      ->check(CLI::IsMember({"harmonic", "perturbed"}));
  sub->add_option("--preconditioner", o.preconditioner, "L-BFGS preconditioner")
      ->check(CLI::IsMember({"laplacian", "area"}));
  sub->add_option("--jac-floor", o.jac_floor, "Relative Jacobian floor for line-search trials")
      ->check(CLI::Range(0.0, 1.0));
}

MinimizeConfig make_config(const MinimizeOpts& o) {
  MinimizeConfig cfg;
  cfg.profile = power_profile(o.p);
  cfg.grad_tol = o.tol;
  cfg.max_iters = o.max_iter;
  cfg.seed = o.seed;
  cfg.preconditioner = parse_preconditioner(o.preconditioner);
  cfg.jac_floor = o.jac_floor;
  return cfg;
}

std::string map_text(const DiscreteMap& map) {
  std::ostringstream ss;
  write_map(ss, map);
  return ss.str();
}

std::string mesh_text(const DiskMesh& mesh) {
  std::ostringstream ss;
  write_mesh(ss, mesh);
  return ss.str();
}

std::string history_csv(const MinimizeResult& r) {
  std::string s = "iter,energy,grad_norm,min_J\n";
  for (const auto& rec : r.history) {
    s += std::to_string(rec.iter) + "," + format_double(rec.energy) + "," +
         format_double(rec.grad_norm) + "," + format_double(rec.min_J) + "\n";
  }
  return s;
}

json result_json(const MinimizeOpts& o, const CircleHomeo& h0, const DiskMesh& mesh,
                 const MinimizeResult& r) {
  const auto field = distortion(mesh, r.map);
  json j;
  j["p"] = o.p;
  j["level"] = o.level;
  j["boundary"] = h0.spec();
  j["boundary_modulus"] = h0.modulus();
  j["num_vertices"] = mesh.num_vertices();
  j["num_triangles"] = mesh.num_triangles();
  j["init"] = o.init;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["energy"] = r.energy;
  j["final_grad_norm"] = r.final_grad_norm;
  j["grad_tol"] = o.tol;
  j["min_J"] = r.min_J;
  j["max_K"] = num(field.max_K);
  j["dirichlet_energy"] = dirichlet_energy(mesh, r.map);
  j["restarts"] = o.restarts;
  return j;
}

struct MinimizeOutput {
  std::vector<Artifact> artifacts;
  json result;
  bool converged = true;
};

MinimizeOutput run_minimization(const MinimizeOpts& o, RunInfo& info) {
  const CircleHomeo h0 = parse_boundary(o.boundary);
  const DiskMesh mesh = build_disk_mesh(o.level);
  const MinimizeConfig cfg = make_config(o);
  info.level = o.level;
  info.p = o.p;
  info.boundary = h0.spec();
  info.seeds["seed"] = o.seed;

  MinimizeOutput out;
  out.artifacts.push_back({"mesh.txt", mesh_text(mesh)});

  if (o.restarts < 2) {
    const InitMode init = o.init == "perturbed"
                              ? InitMode::perturbed_start(substream_seed(o.seed, "init"))
                              : InitMode::harmonic_start();
    if (o.init == "perturbed") info.seeds["init"] = init.seed;
    const MinimizeResult r = minimize(mesh, h0, cfg, init);
    out.artifacts.push_back({"map.txt", map_text(r.map)});
    out.artifacts.push_back({"history.csv", history_csv(r)});
    out.result = result_json(o, h0, mesh, r);
    out.converged = r.converged;
  } else {
    if (o.init != "harmonic") throw UsageError("--init applies to single runs only");
    const UniquenessReport u = uniqueness_probe(mesh, h0, cfg, o.restarts, o.seed);
    const MinimizeResult& r = u.runs.front();
    out.artifacts.push_back({"map.txt", map_text(r.map)});
    out.artifacts.push_back({"history.csv", history_csv(r)});
    for (std::size_t i = 1; i < u.runs.size(); ++i) {
      out.artifacts.push_back({"restart_" + std::to_string(i) + ".txt", map_text(u.runs[i].map)});
    }
    json uj;
    uj["restarts"] = o.restarts;
    uj["labels"] = u.labels;
    json runs = json::array();
    for (std::size_t i = 0; i < u.runs.size(); ++i) {
      runs.push_back({{"label", u.labels[i]},
                      {"converged", u.runs[i].converged},
                      {"iterations", u.runs[i].iterations},
                      {"energy", u.runs[i].energy},
                      {"final_grad_norm", u.runs[i].final_grad_norm},
                      {"min_J", u.runs[i].min_J}});
    }
    uj["runs"] = std::move(runs);
    uj["max_pairwise_linf"] = u.max_pairwise_linf;
    json matrix = json::array();
    const std::size_t m = u.runs.size();
    for (std::size_t i = 0; i < m; ++i) {
      json row = json::array();
      for (std::size_t k = 0; k < m; ++k) row.push_back(u.pairwise_linf[i * m + k]);
      matrix.push_back(std::move(row));
    }
    uj["pairwise_linf"] = std::move(matrix);
    uj["energy_spread"] = u.energy_spread;
    uj["partial"] = u.partial;
    out.artifacts.push_back({"uniqueness.json", dump(uj)});
    out.result = result_json(o, h0, mesh, r);
    out.result["max_pairwise_linf"] = u.max_pairwise_linf;
    out.result["energy_spread"] = u.energy_spread;
    out.converged = !u.partial;
  }
  out.artifacts.push_back({"result.json", dump(out.result)});
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct LoadedRun {
  DiskMesh mesh;
  DiscreteMap map;
  double p = 2.0;
  std::string boundary;
  std::vector<DiscreteMap> restarts;  // restart_1.txt, restart_2.txt, ...
};

LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("run directory " + dir.string() + " not found");
  const json result = json::parse(read_file(dir / "result.json"));
  DiskMesh mesh = load_mesh((dir / "mesh.txt").string());
  DiscreteMap map = load_map((dir / "map.txt").string(), mesh);
  LoadedRun run{std::move(mesh), std::move(map), result.at("p").get<double>(),
                result.at("boundary").get<std::string>(), {}};
  for (int i = 1;; ++i) {
    const fs::path path = dir / ("restart_" + std::to_string(i) + ".txt");
    if (!fs::exists(path)) break;
    run.restarts.push_back(load_map(path.string(), run.mesh));
  }
  return run;
}

struct DiagnoseOpts {
  std::string tests = "inner,weak15,weak18,hopf,beltrami";
  int n_fields = 10;
  std::uint64_t seed = 11;
  double step = 1e-4;
  std::string weak15 = "derived";
  std::string weak18 = "euler-lagrange";
  std::string k_convention = "scaled";
  double tau = 1e-3;
};

void add_diagnose_options(CLI::App* sub, DiagnoseOpts& o, const std::string& seed_flags) {
  sub->add_option("--tests", o.tests,
                  "Comma list of inner, weak15, weak18, hopf, beltrami, quasireg");
  sub->add_option("--n-fields", o.n_fields, "Number of seeded test fields")->check(CLI::Range(1, 1000));
  sub->add_option(seed_flags, o.seed, "Seed for the test fields");
  sub->add_option("--step", o.step, "Flow step for the inner variation")->check(CLI::PositiveNumber);
  sub->add_option("--weak15-convention", o.weak15, "derived | verbatim")
      ->check(CLI::IsMember({"derived", "verbatim"}));
  sub->add_option("--weak18-convention", o.weak18, "euler-lagrange | verbatim")
      ->check(CLI::IsMember({"euler-lagrange", "el", "verbatim"}));
  sub->add_option("--k-convention", o.k_convention, "scaled | raw")
      ->check(CLI::IsMember({"scaled", "raw"}));
  sub->add_option("--tau", o.tau, "Tolerance for the quasiregularity test")->check(CLI::PositiveNumber);
}

std::uint64_t field_seed(std::uint64_t seed, int i) {
  return substream_seed(seed, "field-" + std::to_string(i));
}

json weak_json(const char* test, std::uint64_t seed, const char* convention, const WeakFormResult& w) {
  return {{"test", test},
          {"field_seed", seed},
          {"residual", num(w.residual)},
          {"convention", convention},
          {"lhs", cjson(w.lhs)},
          {"rhs", cjson(w.rhs)},
          {"scale", w.scale}};
}

json annulus_json(const AnnulusReport& a) {
  return {{"delta", a.delta},
          {"triangles", a.triangles},
          {"nondegenerate", a.nondegenerate},
          {"sup_mu_eta", num(a.sup_mu_eta)},
          {"max_rel_eta_w", num(a.max_rel_eta_w)},
          {"M", num(a.M)},
          {"epsilon", num(a.epsilon)},
          {"k_g", num(a.k_g)},
          {"qualifying", a.qualifying},
          {"inequality_violations", a.inequality_violations},
          {"sup_mu_eta_qualifying", num(a.sup_mu_eta_qualifying)}};
}

json run_diagnostics(const LoadedRun& run, const DiagnoseOpts& o, RunInfo& info) {
  const std::vector<std::string> tests = split(o.tests, ',');
  if (tests.empty()) throw UsageError("--tests is empty");
  for (const auto& t : tests) {
    if (t != "inner" && t != "weak15" && t != "weak18" && t != "hopf" && t != "beltrami" &&
        t != "quasireg") {
      throw UsageError("unknown diagnostic '" + t + "'");
    }
  }
  const auto wants = [&](const char* name) {
    return std::find(tests.begin(), tests.end(), name) != tests.end();
  };
  const EnergyProfile profile = power_profile(run.p);
  const InnerFormConvention c15 = parse_inner_convention(o.weak15);
  const OuterFormConvention c18 = parse_outer_convention(o.weak18);
  const KConvention kc = parse_k_convention(o.k_convention);

  info.level = run.mesh.refinement_level();
  info.p = run.p;
  info.boundary = run.boundary;
  info.seeds["diag_seed"] = o.seed;

  json out = json::array();
  std::vector<TestField> fields;
  if (wants("inner") || wants("weak15") || wants("weak18")) {
    json seeds = json::array();
    for (int i = 0; i < o.n_fields; ++i) {
      fields.push_back(random_test_field(run.mesh, field_seed(o.seed, i)));
      seeds.push_back(fields.back().seed);
    }
    info.seeds["field_seeds"] = std::move(seeds);
  }

  if (wants("inner")) {
    for (const auto& phi : fields) {
      const InnerVariation v = inner_variation_derivative(run.mesh, run.map, profile, phi, o.step);
      out.push_back({{"test", "inner"},
                     {"field_seed", phi.seed},
                     {"residual", std::abs(v.derivative) / v.energy},
                     {"derivative", v.derivative},
                     {"derivative_half", v.derivative_half},
                     {"richardson", v.richardson},
                     {"predicted", v.predicted},
                     {"energy", v.energy}});
    }
  }
  if (wants("weak15")) {
    const DiscreteMap inverse = resample_inverse(run.mesh, run.map);
    for (const auto& phi : fields) {
      out.push_back(weak_json("weak15", phi.seed, o.weak15.c_str(),
                              weak_form_15_residual(run.mesh, inverse, profile, phi, c15)));
    }
  }
  if (wants("weak18")) {
    const char* name = c18 == OuterFormConvention::verbatim ? "verbatim" : "euler-lagrange";
    for (const auto& phi : fields) {
      out.push_back(weak_json("weak18", phi.seed, name,
                              weak_form_18_residual(run.mesh, run.map, profile, phi, c18)));
    }
  }
  std::optional<HopfField> hopf;
  if (wants("hopf") || wants("beltrami")) hopf = hopf_field(run.mesh, run.map, profile);
  if (wants("hopf")) {
    const LowerBoundReport lb = hopf_lower_bound(run.mesh, run.map, profile);
    const auto field = distortion(run.mesh, run.map);
    out.push_back({{"test", "hopf"},
                   {"field_seed", nullptr},
                   {"residual", hopf->summary.L2_residual},
                   {"L1_residual", hopf->summary.L1_residual},
                   {"L2_residual", hopf->summary.L2_residual},
                   {"max_residual", hopf->summary.max_residual},
                   {"refinement_level", hopf->summary.refinement_level},
                   {"identity_check_26", identity_check_26(run.mesh, run.map, profile)},
                   {"lower_bound",
                    {{"triangles_checked", lb.triangles_checked},
                     {"identity_max_rel_error", lb.identity_max_rel_error},
                     {"growth_violations", lb.growth_violations},
                     {"floor_violations", lb.floor_violations},
                     {"min_phi_over_KpJ", lb.min_phi_over_KpJ}}},
                   {"lipschitz_witness", lipschitz_witness(run.mesh, run.map)},
                   {"min_J", field.min_J}});
  }
  if (wants("beltrami")) {
    const BeltramiResidual self = beltrami_residual(run.mesh, run.map, *hopf, run.p, kc);
    const HolomorphicFit fit = fit_holomorphic(run.mesh, *hopf);
    const BeltramiResidual cross = beltrami_residual(
        run.mesh, run.map, [&fit](Complex w) { return fit(w); }, run.p, kc);
    out.push_back({{"test", "beltrami"},
                   {"field_seed", nullptr},
                   {"residual", num(self.max)},
                   {"k_convention", to_string(kc)},
                   {"self", {{"max", num(self.max)}, {"l2", num(self.l2)}, {"singular", self.singular}}},
                   {"holomorphic_fit_misfit", fit.relative_misfit},
                   {"cross",
                    {{"max_inner", num(cross.max_inner)},
                     {"l2_inner", num(cross.l2_inner)},
                     {"l2", num(cross.l2)},
                     {"singular", cross.singular}}}});
  }
  if (wants("quasireg")) {
    if (run.restarts.empty()) throw UsageError("quasireg needs a run made with --restarts >= 2");
    for (std::size_t i = 0; i < run.restarts.size(); ++i) {
      const QuasiregularityReport q =
          quasiregularity_of_difference(run.mesh, run.restarts[i], run.map, profile, o.tau);
      double sup = 0.0;
      json annuli = json::array();
      for (const auto& a : q.annuli) {
        sup = std::max(sup, a.sup_mu_eta);
        annuli.push_back(annulus_json(a));
      }
      out.push_back({{"test", "quasireg"},
                     {"field_seed", nullptr},
                     {"residual", num(sup)},
                     {"pair", json::array({0, static_cast<int>(i) + 1})},
                     {"status", q.status},
                     {"tau", q.tau},
                     {"annuli", std::move(annuli)}});
    }
  }
  return out;
}

json duality_json(const DiskMesh& mesh, const DiscreteMap& map, double p, bool extrapolate) {
  InverseOptions opts;
  opts.extrapolate = extrapolate;
  const DualityReport r = duality_report(mesh, map, power_profile(p), opts);
  json q = json::array();
  for (const auto& [quantile, K] : r.K_quantiles) q.push_back({{"q", quantile}, {"K", num(K)}});
  return {{"p", p},
          {"level", mesh.refinement_level()},
          {"extrapolate", extrapolate},
          {"energy_star", r.energy_star},
          {"energy_plain_of_inverse", r.energy_plain_of_inverse},
          {"duality_gap", r.duality_gap},
          {"min_J", r.min_J},
          {"max_K", num(r.max_K)},
          {"K_quantiles", std::move(q)}};
}

// Largest value of `key` over diagnostics rows of one test.
double max_residual(const json& rows, const char* test) {
  double m = 0.0;
  for (const auto& r : rows) {
    if (r.at("test") == test && r.at("residual").is_number()) {
      m = std::max(m, r.at("residual").get<double>());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

int default_threads() {
  if (const char* env = std::getenv("CONFORMAL_LAB_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) {
      throw UsageError("CONFORMAL_LAB_THREADS must be an integer in [1, 1024]");
    }
    return static_cast<int>(n);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

json config_snapshot(const CLI::App* sub) {
  json c = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "out") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      value = res.empty() ? "true" : res.back();
    } else {
      value = opt->get_default_str();
    }
    c[name] = value;
  }
  return c;
}

void emit_error(const std::string& kind, const std::string& message, int code) {
  json e;
  e["error"] = kind;
  e["message"] = message;
  e["exit_code"] = code;
  std::cerr << e.dump() << "\n";
}

const std::vector<std::string> kSubcommands = {"mesh",   "minimize", "diagnose", "levelcurve",
                                               "ellipticity", "oracle", "duality", "all",
                                               "rerun"};

// Expands --config into explicit flags placed right after the subcommand
// name, so explicit flags given later take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> configs;
  std::vector<std::string> rest = strip_option(args, "--config", &configs);
  if (configs.empty()) return rest;
  if (configs.size() > 1) throw UsageError("--config given more than once");
  const auto it = std::find_first_of(rest.begin(), rest.end(), kSubcommands.begin(), kSubcommands.end());
  if (it == rest.end()) throw UsageError("--config needs a subcommand");
  const std::vector<std::string> flags = config_flags(configs.front());
  rest.insert(it + 1, flags.begin(), flags.end());
  return rest;
}

int dispatch(std::vector<std::string> args);

int do_rerun(Context& ctx, const std::string& manifest_file, const std::string& out,
             std::optional<int> threads) {
  const json manifest = json::parse(read_file(manifest_file));
  std::vector<std::string> argv = manifest.at("argv").get<std::vector<std::string>>();
  argv = strip_option(strip_option(argv, "--out"), "--threads");
  if (out.empty()) throw UsageError("rerun needs --out so the original run is left untouched");
  const fs::path manifest_path(manifest_file);
  const bool dir_run = manifest_path.filename() == "manifest.json";
  const std::string suffix = ".manifest.json";
  if (!dir_run && (manifest_file.size() <= suffix.size() ||
                   manifest_file.compare(manifest_file.size() - suffix.size(), suffix.size(), suffix) != 0)) {
    throw UsageError("manifest file name must be manifest.json or end in .manifest.json");
  }
  const fs::path original = dir_run ? manifest_path.parent_path()
                                    : fs::path(manifest_file.substr(0, manifest_file.size() - suffix.size()));
  if (fs::weakly_canonical(fs::path(out)) == fs::weakly_canonical(fs::absolute(original))) {
    throw UsageError("rerun --out must differ from the original output");
  }
  argv.push_back("--out");
  argv.push_back(out);
  argv.push_back("--threads");
  argv.push_back(std::to_string(threads.value_or(ctx.threads)));

  const int code = dispatch(argv);
  if (code != kExitOk) return code;

  const fs::path new_manifest = dir_run ? fs::path(out) / "manifest.json" : fs::path(out + ".manifest.json");
  const json fresh = json::parse(read_file(new_manifest));
  std::map<std::string, std::string> fresh_hashes;
  for (const auto& a : fresh.at("artifacts")) {
    std::string name = a.at("name").get<std::string>();
    // A single-file run names its artifact after the output file.
    if (!dir_run && name == fs::path(out).filename().string()) name = original.filename().string();
    fresh_hashes[name] = a.at("fnv1a64").get<std::string>();
  }
  json report;
  report["manifest"] = manifest_file;
  report["out"] = out;
  json rows = json::array();
  bool all_match = fresh.at("artifacts").size() == manifest.at("artifacts").size();
  for (const auto& a : manifest.at("artifacts")) {
    const std::string name = a.at("name").get<std::string>();
    const std::string expected = a.at("fnv1a64").get<std::string>();
    const auto found = fresh_hashes.find(name);
    const std::string actual = found == fresh_hashes.end() ? "" : found->second;
    const bool match = actual == expected;
    all_match = all_match && match;
    rows.push_back({{"name", name}, {"expected", expected}, {"actual", actual}, {"match", match}});
  }
  report["artifacts"] = std::move(rows);
  report["identical"] = all_match;
  std::cout << dump(report);
  if (!all_match) throw NumericalFailure("mismatch", "rerun produced different artifacts");
  return kExitOk;
}

int dispatch(std::vector<std::string> args) {
  args = expand_config(args);

  CLI::App app{"Conformal energy minimization on the unit disk", "conformal-lab"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<int> threads_flag;
  app.add_option("--threads", threads_flag, "Worker cap (default: CONFORMAL_LAB_THREADS or all cores)")
      ->check(CLI::Range(1, 1024));

  std::string out;
  const auto add_out = [&out](CLI::App* sub, const char* what) {
    sub->add_option("--out", out, what);
  };

  // mesh
  int mesh_level = 5;
  auto* mesh_cmd = app.add_subcommand("mesh", "Write the disk triangulation");
  mesh_cmd->add_option("--level", mesh_level, "Refinement level")->check(CLI::Range(0, kMaxRefinementLevel));
  add_out(mesh_cmd, "Mesh file (stdout if omitted)");

  // minimize
  MinimizeOpts min_opts;
  auto* min_cmd = app.add_subcommand("minimize", "Minimize E*_A with a prescribed boundary map");
  add_minimize_options(min_cmd, min_opts);
  add_out(min_cmd, "Run directory (must be new or empty)");

  // diagnose
  DiagnoseOpts diag_opts;
  std::string diag_run;
  std::string hopf_csv;
  auto* diag_cmd = app.add_subcommand("diagnose", "Variational and Hopf diagnostics of a run");
  diag_cmd->add_option("--run", diag_run, "Run directory written by minimize")->required();
  add_diagnose_options(diag_cmd, diag_opts, "--seed,--diag-seed");
  diag_cmd->add_option("--hopf-csv", hopf_csv, "Also write barycenter samples of Phi to this CSV");
  add_out(diag_cmd, "JSON report (stdout if omitted)");

  // levelcurve
  double lc_p = 2.0, lc_k = 10.0, lc_xmin = 3.5, lc_xmax = 12.0;
  int lc_n = 400;
  auto* lc_cmd = app.add_subcommand("levelcurve", "Sample the level curve of the Beltrami operator");
  lc_cmd->add_option("--p", lc_p, "Exponent")->check(CLI::Range(1.0, 1e6));
  lc_cmd->add_option("--k", lc_k, "Level")->check(CLI::PositiveNumber);
  lc_cmd->add_option("--x-min", lc_xmin, "Smallest x")->check(CLI::PositiveNumber);
  lc_cmd->add_option("--x-max", lc_xmax, "Largest x")->check(CLI::PositiveNumber);
  lc_cmd->add_option("--n", lc_n, "Number of points")->check(CLI::Range(2, 10000000));
  add_out(lc_cmd, "CSV file (stdout if omitted)");

  // ellipticity
  double el_p = 2.0;
  long long el_n = 1000000, el_theta = 10000;
  std::uint64_t el_seed = 42;
  auto* el_cmd = app.add_subcommand("ellipticity", "Sample the ellipticity bounds of the Beltrami operator");
  el_cmd->add_option("--p", el_p, "Exponent")->check(CLI::Range(1.0, 1e6));
  el_cmd->add_option("--n", el_n, "Number of samples")->check(CLI::Range(1LL, 1000000000LL));
  el_cmd->add_option("--seed", el_seed, "Seed");
  el_cmd->add_option("--theta-samples", el_theta, "Tuples checked on the theta grid")
      ->check(CLI::Range(0LL, 1000000000LL));
  add_out(el_cmd, "JSON report (stdout if omitted)");

  // oracle
  std::string or_kind = "poisson", or_boundary = "sine:eps=0.3,m=1", or_a = "0", or_c = "0";
  int or_level = 5, or_nquad = 4096;
  double or_alpha = 0.0;
  auto* or_cmd = app.add_subcommand("oracle", "Write a reference map");
  or_cmd->add_option("--kind", or_kind, "harmonic | poisson | mobius | rotation | linear");
  or_cmd->add_option("--boundary", or_boundary, "Boundary map for harmonic and poisson");
  or_cmd->add_option("--level", or_level, "Refinement level")->check(CLI::Range(0, kMaxRefinementLevel));
  or_cmd->add_option("--n-quad", or_nquad, "Quadrature nodes for poisson")->check(CLI::Range(256, 1 << 24));
  or_cmd->add_option("--a", or_a, "Mobius center, e.g. 0.3+0.1i");
  or_cmd->add_option("--alpha", or_alpha, "Rotation angle");
  or_cmd->add_option("--c", or_c, "Coefficient of z + c conj(z)");
  add_out(or_cmd, "Map file (stdout if omitted)");

  // duality
  std::string du_run, du_mesh, du_map;
  std::optional<double> du_p;
  bool du_extrapolate = false;
  auto* du_cmd = app.add_subcommand("duality", "Compare E*_A(h) with E_A(h^-1)");
  du_cmd->add_option("--run", du_run, "Run directory written by minimize");
  du_cmd->add_option("--mesh", du_mesh, "Mesh file (with --map)");
  du_cmd->add_option("--map", du_map, "Map file (with --mesh)");
  du_cmd->add_option("--p", du_p, "Exponent (default: the run's)")->check(CLI::Range(1.0, 1e6));
  du_cmd->add_flag("--extrapolate", du_extrapolate, "Extrapolate the inverse outside the image");
  add_out(du_cmd, "JSON report (stdout if omitted)");

  // all
  MinimizeOpts all_min;
  DiagnoseOpts all_diag;
  auto* all_cmd = app.add_subcommand("all", "minimize, diagnose and duality on one boundary");
  add_minimize_options(all_cmd, all_min);
  add_diagnose_options(all_cmd, all_diag, "--diag-seed");
  add_out(all_cmd, "Run directory (must be new or empty)");

  // rerun
  std::string rr_manifest;
  auto* rr_cmd = app.add_subcommand("rerun", "Replay a manifest and compare artifact hashes");
  rr_cmd->add_option("--manifest", rr_manifest, "manifest.json or <file>.manifest.json")->required();
  add_out(rr_cmd, "Output for the replay (must differ from the original)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, std::cout, std::cerr);
      return kExitOk;
    }
    emit_error("usage", e.what(), kExitInvalid);
    return kExitInvalid;
  }

  Context ctx;
  ctx.start = std::chrono::steady_clock::now();
  ctx.started_at = utc_timestamp();
  ctx.threads = threads_flag ? *threads_flag : default_threads();
  set_thread_count(ctx.threads);
  ctx.argv = args;
  for (auto* sub : app.get_subcommands()) {
    ctx.command = sub->get_name();
    ctx.config = config_snapshot(sub);
  }
  RunInfo info;

  if (mesh_cmd->parsed()) {
    const DiskMesh mesh = build_disk_mesh(mesh_level);
    info.level = mesh_level;
    emit_file(ctx, out, info, mesh_text(mesh));
    return kExitOk;
  }

  if (min_cmd->parsed() || all_cmd->parsed()) {
    if (out.empty()) throw UsageError("--out is required");
    require_fresh_directory(out);
    const MinimizeOpts& mo = min_cmd->parsed() ? min_opts : all_min;
    MinimizeOutput mout = run_minimization(mo, info);
    if (all_cmd->parsed() && mout.converged) {
      const DiskMesh mesh = build_disk_mesh(mo.level);
      DiagnoseOpts d = all_diag;
      if (mo.restarts >= 2 && !all_cmd->get_option("--tests")->count()) d.tests += ",quasireg";
      std::vector<DiscreteMap> restarts;
      DiscreteMap map;
      for (const auto& a : mout.artifacts) {
        std::istringstream in(a.content);
        if (a.name == "map.txt") map = read_map(in, mesh);
        if (a.name.rfind("restart_", 0) == 0) restarts.push_back(read_map(in, mesh));
      }
      const LoadedRun run{mesh, map, mo.p, info.boundary, restarts};
      const json diag = run_diagnostics(run, d, info);
      const json dual = duality_json(mesh, map, mo.p, false);
      mout.artifacts.push_back({"diagnostics.json", dump(diag)});
      mout.artifacts.push_back({"duality.json", dump(dual)});

      const double inner = max_residual(diag, "inner");
      json pipeline;
      pipeline["boundary"] = info.boundary;
      pipeline["p"] = mo.p;
      pipeline["level"] = mo.level;
      pipeline["converged"] = mout.result.at("converged");
      pipeline["iterations"] = mout.result.at("iterations");
      pipeline["energy"] = mout.result.at("energy");
      pipeline["min_J"] = mout.result.at("min_J");
      pipeline["duality_gap"] = dual.at("duality_gap");
      json hopf = json::object();
      for (const auto& r : diag) {
        if (r.at("test") == "hopf") {
          hopf["L1_residual"] = r.at("L1_residual");
          hopf["L2_residual"] = r.at("L2_residual");
          hopf["max_residual"] = r.at("max_residual");
          hopf["identity_check_26"] = r.at("identity_check_26");
        }
      }
      pipeline["hopf"] = std::move(hopf);
      pipeline["inner_variation_max"] = inner;
      pipeline["weak15_max"] = max_residual(diag, "weak15");
      pipeline["weak18_max"] = max_residual(diag, "weak18");
      pipeline["beltrami_self_max"] = max_residual(diag, "beltrami");
      json checks;
      checks["converged"] = mout.result.at("converged").get<bool>();
      checks["min_J_positive"] = mout.result.at("min_J").get<double>() > 0.0;
      checks["inner_variation_le_1e-4"] = inner <= 1e-4;
      checks["duality_gap_le_5e-2"] = dual.at("duality_gap").get<double>() <= 5e-2;
      checks["identity_check_26_le_1e-12"] =
          pipeline["hopf"].contains("identity_check_26")
              ? pipeline["hopf"]["identity_check_26"].get<double>() <= 1e-12
              : true;
      bool ok = true;
      for (const auto& [k, v] : checks.items()) ok = ok && v.get<bool>();
      pipeline["checks"] = std::move(checks);
      pipeline["all_passed"] = ok;
      mout.artifacts.push_back({"pipeline.json", dump(pipeline)});
    }
    emit_directory(ctx, out, info, mout.artifacts);
    if (!mout.converged) {
      throw NumericalFailure("stall", "minimization did not reach the gradient tolerance");
    }
    return kExitOk;
  }

  if (diag_cmd->parsed()) {
    const LoadedRun run = load_run(diag_run);
    const json diag = run_diagnostics(run, diag_opts, info);
    if (!hopf_csv.empty()) {
      const HopfField hf = hopf_field(run.mesh, run.map, power_profile(run.p));
      std::string csv = "x,y,phi_re,phi_im\n";
      for (std::size_t t = 0; t < hf.Phi.size(); ++t) {
        csv += format_double(hf.barycenter[t].real()) + "," + format_double(hf.barycenter[t].imag()) +
               "," + format_double(hf.Phi[t].real()) + "," + format_double(hf.Phi[t].imag()) + "\n";
      }
      write_file(hopf_csv, csv);
    }
    emit_file(ctx, out, info, dump(diag));
    return kExitOk;
  }

  if (lc_cmd->parsed()) {
    if (!(lc_xmax > lc_xmin)) throw UsageError("--x-max must exceed --x-min");
    const auto pts = level_curve_points(lc_p, lc_k, lc_xmin, lc_xmax, lc_n);
    std::string csv = "x,y,residual\n";
    for (const auto& [x, y] : pts) {
      csv += format_double(x) + "," + format_double(y) + "," +
             format_double(level_relation_residual(lc_p, lc_k, x, y)) + "\n";
    }
    info.p = lc_p;
    emit_file(ctx, out, info, csv);
    return kExitOk;
  }

  if (el_cmd->parsed()) {
    const EllipticityReport r = ellipticity_sample(el_p, el_n, el_seed, el_theta);
    info.p = el_p;
    info.seeds["seed"] = el_seed;
    json j;
    j["p"] = r.p;
    j["seed"] = r.seed;
    j["samples"] = r.samples;
    j["rejected_coincident"] = r.rejected_coincident;
    j["tolerance"] = r.tolerance;
    j["violations_39"] = r.violations_39;
    j["worst_margin_39"] = num(r.worst_margin_39);
    j["violations_39_first"] = r.violations_39_first;
    j["worst_margin_39_first"] = num(r.worst_margin_39_first);
    j["violations_37"] = r.violations_37;
    j["worst_margin_37"] = num(r.worst_margin_37);
    j["max_lipschitz_bound"] = num(r.max_lipschitz_bound);
    j["theta_grid"] = r.theta_grid;
    j["theta_checked"] = r.theta_checked;
    j["theta_off_pi"] = r.theta_off_pi;
    j["theta_flat"] = r.theta_flat;
    j["passed"] = r.passed();
    emit_file(ctx, out, info, dump(j));
    return kExitOk;
  }

  if (or_cmd->parsed()) {
    const DiskMesh mesh = build_disk_mesh(or_level);
    const OracleKind kind = parse_oracle_kind(or_kind);
    info.level = or_level;
    DiscreteMap map;
    switch (kind) {
      case OracleKind::harmonic_fem:
      case OracleKind::poisson_quadrature: {
        const CircleHomeo h0 = parse_boundary(or_boundary);
        info.boundary = h0.spec();
        map = kind == OracleKind::harmonic_fem ? harmonic_extension_fem(mesh, h0)
                                               : poisson_quadrature(mesh, h0, or_nquad);
        break;
      }
      case OracleKind::mobius:
        map = mobius_map(mesh, parse_complex(or_a), or_alpha);
        break;
      case OracleKind::rotation:
        map = rotation_map(mesh, or_alpha);
        break;
      case OracleKind::linear:
        map = linear_map(mesh, parse_complex(or_c));
        break;
    }
    emit_file(ctx, out, info, map_text(map));
    return kExitOk;
  }

  if (du_cmd->parsed()) {
    const bool from_run = !du_run.empty();
    const bool from_files = !du_mesh.empty() || !du_map.empty();
    if (from_run == from_files) throw UsageError("give either --run or both --mesh and --map");
    json j;
    if (from_run) {
      const LoadedRun run = load_run(du_run);
      info.boundary = run.boundary;
      info.level = run.mesh.refinement_level();
      info.p = du_p.value_or(run.p);
      j = duality_json(run.mesh, run.map, *info.p, du_extrapolate);
    } else {
      if (du_mesh.empty() || du_map.empty()) throw UsageError("--mesh and --map go together");
      const DiskMesh mesh = load_mesh(du_mesh);
      const DiscreteMap map = load_map(du_map, mesh);
      info.level = mesh.refinement_level();
      info.p = du_p.value_or(2.0);
      j = duality_json(mesh, map, *info.p, du_extrapolate);
    }
    emit_file(ctx, out, info, dump(j));
    return kExitOk;
  }

  if (rr_cmd->parsed()) {
    return do_rerun(ctx, rr_manifest, out, threads_flag);
  }
  throw UsageError("no subcommand");
}

}  // namespace

int run(std::vector<std::string> args) {
  try {
    return dispatch(std::move(args));
  } catch (const UsageError& e) {
    emit_error("usage", e.what(), kExitInvalid);
    return kExitInvalid;
  } catch (const NumericalFailure& e) {
    emit_error(e.kind, e.what(), kExitNumerical);
    return kExitNumerical;
  } catch (const Error& e) {
    const int code = is_numerical(e.kind()) ? kExitNumerical : kExitInvalid;
    emit_error(std::string(to_string(e.kind())), e.what(), code);
    return code;
  } catch (const nlohmann::json::exception& e) {
    emit_error("parse", e.what(), kExitInvalid);
    return kExitInvalid;
  } catch (const fs::filesystem_error& e) {
    emit_error("io", e.what(), kExitInvalid);
    return kExitInvalid;
  }
}

}  // namespace conformal_lab::cli
