#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hsurf/io.hpp"
#include "hsurf/random_surface.hpp"

using namespace hsurf;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = HSURF_FIXTURE_DIR;
const std::string kCli = HSURF_CLI_PATH;

fs::path temp_dir() {
  fs::path d = fs::temp_directory_path() /
               ("hsurf_io_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  int rc = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

}  // namespace

TEST_CASE("surf-grid files round-trip bitwise") {
  fs::path dir = temp_dir();
  for (const char* name : {"sphere.surf", "bumpy.surf"}) {
    RadialSurface s = load_surf_grid(kFixtures + "/" + std::string(name));
    fs::path copy = dir / name;
    save_surf_grid(copy.string(), s);
    RadialSurface t = load_surf_grid(copy.string());
    REQUIRE(t.grid.n_theta == s.grid.n_theta);
    REQUIRE(t.grid.n_phi == s.grid.n_phi);
    for (size_t n = 0; n < s.rho.raw().size(); ++n)
      CHECK(t.rho.raw()[n][0] == s.rho.raw()[n][0]);
    // a second save reproduces the file byte for byte
    fs::path copy2 = dir / (std::string(name) + ".2");
    save_surf_grid(copy2.string(), t);
    CHECK(slurp(copy) == slurp(copy2));
  }
}

TEST_CASE("surf-grid rejects malformed input") {
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return read_surf_grid(is);
  };
  CHECK_THROWS_AS(parse("surf 1\n4 8\n"), FormatError);
  CHECK_THROWS_AS(parse("surf-grid 2\n4 8\n"), FormatError);
  CHECK_THROWS_AS(parse("surf-grid 1\n2 8\n"), FormatError);  // nt too small
  CHECK_THROWS_AS(parse("surf-grid 1\n4 9\n"), FormatError);  // odd np
  CHECK_THROWS_AS(parse("surf-grid 1\n4 8\n1 1 1\n"), FormatError);  // short
  std::string neg = "surf-grid 1\n4 8\n";
  for (int n = 0; n < 32; ++n) neg += n == 5 ? "-1 " : "1 ";
  CHECK_THROWS_AS(parse(neg), FormatError);
}

TEST_CASE("metric-grid files round-trip and validate") {
  fs::path dir = temp_dir();
  FormField h = load_metric_grid(kFixtures + "/round_metric.json");
  fs::path copy = dir / "round.json";
  save_metric_grid(copy.string(), h);
  FormField t = load_metric_grid(copy.string());
  for (size_t n = 0; n < h.raw().size(); ++n)
    CHECK((t.raw()[n] - h.raw()[n]).cwiseAbs().maxCoeff() == 0.0);

  fs::path bad = dir / "bad.json";
  spit(bad, "not json at all {");
  CHECK_THROWS_AS(load_metric_grid(bad.string()), FormatError);
  spit(bad, R"({"format":"other","version":1,"n_theta":4,"n_phi":8,"EFG":[]})");
  CHECK_THROWS_AS(load_metric_grid(bad.string()), FormatError);
  spit(bad,
       R"({"format":"metric-grid","version":1,"n_theta":4,"n_phi":8,"EFG":[[1,0,1]]})");
  CHECK_THROWS_AS(load_metric_grid(bad.string()), FormatError);
  CHECK_THROWS_AS(load_metric_grid((dir / "missing.json").string()),
                  std::runtime_error);
}

TEST_CASE("config files parse key=value with comments") {
  fs::path dir = temp_dir();
  fs::path cfg = dir / "run.cfg";
  spit(cfg,
       "# solver settings\n"
       "tol = 1e-6   # inline comment\n"
       "threads=2\n"
       "\n"
       "tol = 1e-7\n");  // later keys win
  auto kv = load_config(cfg.string());
  CHECK(kv.at("tol") == "1e-7");
  CHECK(kv.at("threads") == "2");
  CHECK(kv.size() == 2);

  spit(cfg, "tol 1e-6\n");
  CHECK_THROWS_AS(load_config(cfg.string()), FormatError);
  spit(cfg, "= 3\n");
  CHECK_THROWS_AS(load_config(cfg.string()), FormatError);
}

TEST_CASE("cli exit codes follow the documented contract") {
  fs::path dir = temp_dir();
  CHECK(run_cli("forms " + kFixtures + "/sphere.surf") == 0);
  CHECK(run_cli("") == 1);                  // missing subcommand
  CHECK(run_cli("forms") == 1);             // missing argument
  CHECK(run_cli("--no-such-flag") == 1);

  fs::path garbage = dir / "garbage.surf";
  spit(garbage, "these are not radii\n");
  CHECK(run_cli("forms " + garbage.string()) == 2);
  CHECK(run_cli("forms " + (dir / "missing.surf").string()) == 2);

  // round metric with K = 4 > 1 cannot be a third fundamental form
  CHECK(run_cli("realize --third --target " + kFixtures +
                "/small_round_metric.json") == 3);

  CHECK(run_cli("forms " + kFixtures + "/nonconvex.surf") == 4);
  CHECK(run_cli("dualize " + kFixtures + "/nonconvex.surf") == 4);

  // an unreachable tolerance stalls the solver
  CHECK(run_cli("realize --tol 1e-30 --target " + kFixtures +
                "/bumpy_metric.json") == 5);

  CHECK(run_cli("realize --target " + kFixtures + "/bumpy_metric.json") == 0);
  CHECK(run_cli("rigidity " + kFixtures + "/bumpy.surf --which I") == 0);
}

TEST_CASE("cli reports are valid json and deterministic") {
  fs::path dir = temp_dir();
  fs::path r1 = dir / "r1.json", r2 = dir / "r2.json";
  CHECK(run_cli("forms " + kFixtures + "/bumpy.surf --report " + r1.string()) ==
        0);
  CHECK(run_cli("forms " + kFixtures + "/bumpy.surf --report " + r2.string()) ==
        0);
  CHECK(slurp(r1) == slurp(r2));
  nlohmann::json j = nlohmann::json::parse(slurp(r1));
  CHECK(j["pass"].get<bool>());
  CHECK(j["checks"].is_array());

  fs::path g1 = dir / "geo.json";
  CHECK(run_cli("geodesics " + kFixtures + "/round_metric.json --report " +
                g1.string()) == 0);
  nlohmann::json gj = nlohmann::json::parse(slurp(g1));
  double len = 0;
  for (const auto& c : gj["checks"])
    if (c["name"] == "shortest_length") len = c["value"].get<double>();
  CHECK(len == doctest::Approx(2.0 * M_PI * 1.2).epsilon(1e-6));
}

TEST_CASE("config file values apply where flags are absent") {
  fs::path dir = temp_dir();
  fs::path cfg = dir / "solve.cfg";
  spit(cfg, "tol = 1e-6\n");
  fs::path rep = dir / "rep.json";
  CHECK(run_cli("realize --target " + kFixtures +
                "/bumpy_metric.json --config " + cfg.string() + " --report " +
                rep.string()) == 0);
  nlohmann::json j = nlohmann::json::parse(slurp(rep));
  double tol = 0;
  for (const auto& c : j["checks"])
    if (c["name"] == "final_residual") tol = c["tolerance"].get<double>();
  CHECK(tol == 1e-6);  // config value reached the solver

  // an explicit flag wins over the config file
  CHECK(run_cli("realize --target " + kFixtures +
                "/bumpy_metric.json --config " + cfg.string() +
                " --tol 1e-8 --report " + rep.string()) == 0);
  j = nlohmann::json::parse(slurp(rep));
  for (const auto& c : j["checks"])
    if (c["name"] == "final_residual") tol = c["tolerance"].get<double>();
  CHECK(tol == 1e-8);
}
