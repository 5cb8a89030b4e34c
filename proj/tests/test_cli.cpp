#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "conformal_lab/mesh_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace conformal_lab;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Outcome o;
  o.code = cli::run(std::move(args));
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string fresh(const std::string& name) {
  const fs::path p = fs::path("cli") / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

int error_code(const Outcome& o) { return json::parse(o.err).at("exit_code").get<int>(); }

}  // namespace

TEST_CASE("mesh writes the file and its manifest") {
  const std::string out = fresh("mesh2.txt");
  const Outcome o = invoke({"mesh", "--level", "2", "--out", out});
  REQUIRE(o.code == 0);
  const DiskMesh mesh = load_mesh(out);
  CHECK(mesh.refinement_level() == 2);
  const json m = json::parse(slurp(out + ".manifest.json"));
  CHECK(m.at("command") == "mesh");
  CHECK(m.at("level") == 2);
  REQUIRE(m.at("artifacts").size() == 1);
  CHECK(m.at("artifacts")[0].at("bytes") == slurp(out).size());
}

TEST_CASE("validation errors exit 2 with JSON on stderr") {
  for (const std::vector<std::string>& args : std::vector<std::vector<std::string>>{
           {},
           {"bogus"},
           {"mesh", "--level", "-1"},
           {"mesh", "--nope", "1"},
           {"minimize", "--level", "2"},
           {"minimize", "--boundary", "sine:eps=2,m=1", "--out", "cli/never"},
           {"levelcurve", "--x-min", "5", "--x-max", "4"},
           {"rerun", "--manifest", "cli/missing.manifest.json", "--out", "cli/x"}}) {
    const Outcome o = invoke(args);
    CHECK(o.code == 2);
    if (o.code == 2 && !args.empty() && args[0] != "bogus" && args[1] != "--nope") CHECK(error_code(o) == 2);
  }
  CHECK_FALSE(fs::exists("cli/never"));
}

TEST_CASE("a stalled minimization exits 3 and keeps its artifacts") {
  const std::string out = fresh("stall");
  const Outcome o = invoke({"minimize", "--level", "3", "--init", "perturbed", "--max-iter", "2", "--out", out});
  CHECK(o.code == 3);
  const json e = json::parse(o.err);
  CHECK(e.at("error") == "stall");
  CHECK(e.at("exit_code") == 3);
  CHECK(fs::exists(out + "/map.txt"));
  CHECK(json::parse(slurp(out + "/result.json")).at("converged") == false);
}

TEST_CASE("minimize refuses a used directory") {
  const std::string out = fresh("used");
  fs::create_directories(out);
  std::ofstream(out + "/keep.txt") << "x";
  CHECK(invoke({"minimize", "--level", "2", "--out", out}).code == 2);
  CHECK(slurp(out + "/keep.txt") == "x");
}

TEST_CASE("levelcurve reproduces the figure") {
  const std::string out = fresh("fig1.csv");
  REQUIRE(invoke({"levelcurve", "--p", "2", "--k", "10", "--x-min", "3.5", "--x-max", "12", "--n", "400", "--out",
                  out})
              .code == 0);
  const auto rows = read_csv(out);
  REQUIRE(rows.size() == 400);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double x = rows[i][0], y = rows[i][1];
    CHECK(y > 0.0);
    CHECK(y < x);
    const double rel = (x * x + y * y) / (x * x - y * y) * x * y / 10.0 - 1.0;
    CHECK(std::abs(rel) <= 1e-10);
    if (i > 0) CHECK(x > rows[i - 1][0]);
  }
}

TEST_CASE("rotation boundary gives a rotation") {
  const std::string out = fresh("rot");
  REQUIRE(invoke({"minimize", "--p", "2", "--boundary", "rot:alpha=0.5", "--level", "4", "--out", out}).code == 0);
  const json r = json::parse(slurp(out + "/result.json"));
  CHECK(r.at("converged") == true);
  const DiskMesh mesh = load_mesh(out + "/mesh.txt");
  const DiscreteMap map = load_map(out + "/map.txt", mesh);
  const Complex rot = std::polar(1.0, 0.5);
  double worst = 0.0;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    worst = std::max(worst, std::abs(map.values[v] - rot * mesh.vertices()[v]));
  }
  CHECK(worst <= 1e-6);
  CHECK(r.at("energy").get<double>() == doctest::Approx(mesh.total_area()).epsilon(1e-8));
}

TEST_CASE("config files fill in flags that were not given") {
  const std::string cfg = fresh("lc.cfg");
  std::ofstream(cfg) << "# level curve\np = 3\nk=1\nn = 12\nx_min=2\n";
  const std::string a = fresh("cfg_a.csv");
  REQUIRE(invoke({"levelcurve", "--config", cfg, "--out", a}).code == 0);
  CHECK(read_csv(a).size() == 12);
  CHECK(read_csv(a).front()[0] == 2.0);
  const json m = json::parse(slurp(a + ".manifest.json"));
  CHECK(m.at("config").at("p") == "3");

  const std::string b = fresh("cfg_b.csv");
  REQUIRE(invoke({"levelcurve", "--config", cfg, "--n", "7", "--out", b}).code == 0);
  CHECK(read_csv(b).size() == 7);

  const std::string bad = fresh("bad.cfg");
  std::ofstream(bad) << "threads=2\n";
  CHECK(invoke({"levelcurve", "--config", bad, "--out", fresh("cfg_c.csv")}).code == 2);
  CHECK(invoke({"levelcurve", "--config", "cli/absent.cfg", "--out", fresh("cfg_d.csv")}).code == 2);
}

TEST_CASE("thread count comes from the flag, then the environment") {
  const std::string a = fresh("env.csv");
  ::setenv("CONFORMAL_LAB_THREADS", "3", 1);
  REQUIRE(invoke({"levelcurve", "--n", "5", "--out", a}).code == 0);
  CHECK(json::parse(slurp(a + ".manifest.json")).at("threads") == 3);
  REQUIRE(invoke({"--threads", "2", "levelcurve", "--n", "5", "--out", a}).code == 0);
  CHECK(json::parse(slurp(a + ".manifest.json")).at("threads") == 2);
  ::unsetenv("CONFORMAL_LAB_THREADS");
}

TEST_CASE("rerun reproduces artifacts byte for byte") {
  const std::string run = fresh("det");
  REQUIRE(invoke({"--threads", "1", "minimize", "--level", "3", "--restarts", "2", "--seed", "5", "--out", run})
              .code == 0);
  const std::string again = fresh("det_again");
  const Outcome o = invoke({"--threads", "4", "rerun", "--manifest", run + "/manifest.json", "--out", again});
  REQUIRE(o.code == 0);
  const json report = json::parse(o.out);
  CHECK(report.at("identical") == true);
  const json m = json::parse(slurp(run + "/manifest.json"));
  for (const auto& a : m.at("artifacts")) {
    const std::string name = a.at("name").get<std::string>();
    CHECK(slurp(run + "/" + name) == slurp(again + "/" + name));
  }
  CHECK(json::parse(slurp(again + "/manifest.json")).at("threads") == 4);

  CHECK(invoke({"rerun", "--manifest", run + "/manifest.json", "--out", run}).code == 2);

  const std::string csv = fresh("det.csv");
  REQUIRE(invoke({"ellipticity", "--n", "2000", "--theta-samples", "50", "--out", csv}).code == 0);
  const std::string csv2 = fresh("det2.csv");
  REQUIRE(invoke({"rerun", "--manifest", csv + ".manifest.json", "--out", csv2}).code == 0);
  CHECK(slurp(csv) == slurp(csv2));
}

TEST_CASE("a tampered artifact is reported as a mismatch") {
  const std::string a = fresh("tamper.csv");
  REQUIRE(invoke({"levelcurve", "--n", "5", "--out", a}).code == 0);
  json m = json::parse(slurp(a + ".manifest.json"));
  m["artifacts"][0]["fnv1a64"] = "0000000000000000";
  std::ofstream(a + ".manifest.json") << m.dump(2);
  const Outcome o = invoke({"rerun", "--manifest", a + ".manifest.json", "--out", fresh("tamper2.csv")});
  CHECK(o.code == 3);
  CHECK(json::parse(o.out).at("identical") == false);
}

TEST_CASE("oracle and duality") {
  const std::string mesh = fresh("m3.txt");
  REQUIRE(invoke({"mesh", "--level", "3", "--out", mesh}).code == 0);
  const std::string map = fresh("rot3.map");
  REQUIRE(invoke({"oracle", "--kind", "rotation", "--alpha", "0.7", "--level", "3", "--out", map}).code == 0);
  const Outcome o = invoke({"duality", "--mesh", mesh, "--map", map, "--p", "2"});
  REQUIRE(o.code == 0);
  const json d = json::parse(o.out);
  CHECK(d.at("duality_gap").get<double>() <= 1e-12);
}
