#pragma once

// File formats: the surf-grid radial-surface text format, the metric-grid
// JSON format for prescribed forms, JSON check reports, and a small
// key=value config reader.

#include <fstream>
#include <iomanip>
#include <map>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsurf/grid.hpp"
#include "hsurf/surface.hpp"

namespace hsurf {

// Thrown on malformed or unsupported input files.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// surf-grid v1: plain text.
//   surf-grid 1
//   <n_theta> <n_phi>
//   n_theta rows of n_phi radii, 17 significant digits

inline void write_surf_grid(std::ostream& os, const RadialSurface& s) {
  os << "surf-grid 1\n" << s.grid.n_theta << " " << s.grid.n_phi << "\n";
  os << std::setprecision(17);
  for (int i = 0; i < s.grid.n_theta; ++i) {
    for (int j = 0; j < s.grid.n_phi; ++j)
      os << (j ? " " : "") << s.rho.at(i, j)[0];
    os << "\n";
  }
}

inline void save_surf_grid(const std::string& path, const RadialSurface& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_surf_grid(os, s);
}

inline RadialSurface read_surf_grid(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "surf-grid")
    throw FormatError("surf-grid: missing or wrong header");
  if (version != 1)
    throw FormatError("surf-grid: unsupported version " +
                      std::to_string(version));
  int nt = 0, np = 0;
  if (!(is >> nt >> np)) throw FormatError("surf-grid: missing grid size");
  if (nt < 4 || np < 8 || np % 2 != 0)
    throw FormatError("surf-grid: invalid grid size");
  RadialSurface s(SphereGrid(nt, np));
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      double v;
      if (!(is >> v)) throw FormatError("surf-grid: truncated radius data");
      if (!(v > 0.0)) throw FormatError("surf-grid: radii must be positive");
      s.rho.at(i, j)[0] = v;
    }
  return s;
}

inline RadialSurface load_surf_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_surf_grid(is);
}

// ---------------------------------------------------------------------------
// metric-grid v1: JSON with row-major (E, F, G) triples.

inline void save_metric_grid(const std::string& path, const FormField& h) {
  nlohmann::json j;
  j["format"] = "metric-grid";
  j["version"] = 1;
  const SphereGrid& g = h.grid();
  j["n_theta"] = g.n_theta;
  j["n_phi"] = g.n_phi;
  nlohmann::json efg = nlohmann::json::array();
  for (int i = 0; i < g.n_theta; ++i)
    for (int jj = 0; jj < g.n_phi; ++jj) {
      auto v = h.at(i, jj);
      efg.push_back({v[0], v[1], v[2]});
    }
  j["EFG"] = std::move(efg);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

inline FormField load_metric_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric-grid: invalid JSON: ") + e.what());
  }
  if (j.value("format", "") != "metric-grid")
    throw FormatError("metric-grid: missing or wrong format tag");
  if (j.value("version", 0) != 1)
    throw FormatError("metric-grid: unsupported version");
  int nt = j.value("n_theta", 0), np = j.value("n_phi", 0);
  if (nt < 4 || np < 8 || np % 2 != 0)
    throw FormatError("metric-grid: invalid grid size");
  if (!j.contains("EFG") || !j["EFG"].is_array() ||
      (int)j["EFG"].size() != nt * np)
    throw FormatError("metric-grid: EFG array missing or wrong length");
  FormField h = make_form(SphereGrid(nt, np));
  for (int n = 0; n < nt * np; ++n) {
    const auto& row = j["EFG"][n];
    if (!row.is_array() || row.size() != 3)
      throw FormatError("metric-grid: EFG entries must be [E,F,G]");
    h.raw()[n] =
        Eigen::Vector3d(row[0].get<double>(), row[1].get<double>(),
                        row[2].get<double>());
  }
  return h;
}

// ---------------------------------------------------------------------------
// Check reports.

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct CheckReport {
  std::vector<Check> checks;

  void add(const std::string& name, double value, double tol) {
    checks.push_back({name, value, tol, value <= tol});
  }
  void add_flag(const std::string& name, bool ok) {
    checks.push_back({name, ok ? 0.0 : 1.0, 0.5, ok});
  }
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
      j["checks"].push_back({{"name", c.name},
                             {"value", c.value},
                             {"tolerance", c.tolerance},
                             {"pass", c.pass}});
    j["pass"] = all_pass();
    return j;
  }
  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << to_json().dump(2) << "\n";
  }
};

// ---------------------------------------------------------------------------
// key=value config files; '#' starts a comment; later keys win within the
// file, and command-line flags override the file.

inline std::map<std::string, std::string> load_config(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config: expected key=value at line " +
                        std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config: empty key at line " + std::to_string(lineno));
    out[key] = val;
  }
  return out;
}

}  // namespace hsurf
