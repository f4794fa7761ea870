#pragma once

// Deterministic random convex radial surfaces: rho = rho0 + a low-degree
// polynomial in the direction components, normalized to a requested
// sup-norm.  Polynomials of degree <= d restrict to spherical harmonics of
// degree <= d, so the perturbations are band-limited and smooth.

#include <array>
#include <random>
#include <vector>

#include "hsurf/surface.hpp"

namespace hsurf {

struct HarmonicPerturbation {
  // exponent triples (a,b,c) with coefficient w: w * x^a y^b z^c
  std::vector<std::array<int, 4>> terms_;  // a, b, c, unused
  std::vector<double> coef_;

  double operator()(const Vec3& d) const {
    double s = 0;
    for (size_t t = 0; t < coef_.size(); ++t) {
      double m = coef_[t];
      for (int k = 0; k < terms_[t][0]; ++k) m *= d[0];
      for (int k = 0; k < terms_[t][1]; ++k) m *= d[1];
      for (int k = 0; k < terms_[t][2]; ++k) m *= d[2];
      s += m;
    }
    return s;
  }
};

inline HarmonicPerturbation random_harmonic(int max_degree, uint64_t seed) {
  HarmonicPerturbation p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int a = 0; a <= max_degree; ++a)
    for (int b = 0; a + b <= max_degree; ++b)
      for (int c = 0; a + b + c <= max_degree; ++c) {
        if (a + b + c == 0) continue;  // constant absorbed into rho0
        p.terms_.push_back({a, b, c, 0});
        p.coef_.push_back(nd(rng));
      }
  return p;
}

// rho = rho0 + perturbation scaled so its sup over the grid equals amp.
inline RadialSurface random_radial_surface(const SphereGrid& g, double rho0,
                                           double amp, int max_degree,
                                           uint64_t seed) {
  HarmonicPerturbation p = random_harmonic(max_degree, seed);
  RadialSurface s(g, rho0);
  std::vector<double> vals(g.nodes());
  double sup = 0;
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      double v = p(g.dir(i, j));
      vals[g.index(i, j)] = v;
      sup = std::max(sup, std::abs(v));
    }
  double scale = sup > 0 ? amp / sup : 0.0;
  for (int n = 0; n < g.nodes(); ++n) s.rho.raw()[n][0] = rho0 + scale * vals[n];
  return s;
}

}  // namespace hsurf
