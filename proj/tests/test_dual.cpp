#include <doctest.h>

#include "hsurf/dual.hpp"
#include "hsurf/random_surface.hpp"

using namespace hsurf;

namespace {
struct DualErr {
  double metric = 0, second = 0, shape = 0, position = 0;
};

DualErr dual_errors(int nt, int np, unsigned seed) {
  SphereGrid g(nt, np);
  RadialSurface s = random_radial_surface(g, 1.0, 0.1, 4, seed);
  FrameField f = embed(s);
  SurfaceForms sf = fundamental_forms(f);
  DualSurface d = dualize(f);
  DualErr e;
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 III = form_mat(sf.III, i, j);
      double scale = III.cwiseAbs().maxCoeff();
      e.metric = std::max(e.metric, (form_mat(d.forms.I, i, j) - III)
                                        .cwiseAbs()
                                        .maxCoeff() /
                                        scale);
      e.second = std::max(e.second, (form_mat(d.forms.II, i, j) -
                                     form_mat(sf.II, i, j))
                                        .cwiseAbs()
                                        .maxCoeff() /
                                        scale);
      // the mixed chart components of B grow like 1/sin(theta) and amplify
      // the dual's stencil truncation; judge the involution away from the
      // pole rows and at the scale of the factors
      if (i >= g.n_theta / 8 && i < 7 * g.n_theta / 8) {
        Mat2 bd = shape_mat(d.forms.B, i, j), bs = shape_mat(sf.B, i, j);
        e.shape = std::max(e.shape, (bd * bs - Mat2::Identity())
                                        .cwiseAbs()
                                        .maxCoeff() /
                                        std::max(1.0, bd.norm() * bs.norm()));
      }
    }
  // double dual: positions of (S*)* recover S
  DualSurface dd = dualize(d.frame);
  for (int n = 0; n < g.nodes(); ++n)
    e.position = std::max(
        e.position, (dd.frame.x.raw()[n] - f.x.raw()[n]).cwiseAbs().maxCoeff());
  return e;
}
}  // namespace

TEST_CASE("dual of a geodesic sphere carries the closed-form third form") {
  SphereGrid g(48, 96);
  for (double rho : {0.5, 1.0}) {
    FrameField f = embed(RadialSurface(g, rho));
    DualSurface d = dualize(f);
    double c2 = std::cosh(rho) * std::cosh(rho);
    double worst = 0;
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j) {
        double st = std::sin(g.theta(i));
        Mat2 can;
        can << 1, 0, 0, st * st;
        worst = std::max(worst, (form_mat(d.forms.I, i, j) - c2 * can)
                                    .cwiseAbs()
                                    .maxCoeff() /
                                    c2);
        // B* = B^{-1} = tanh(rho) Id on the sphere
        worst = std::max(worst, (shape_mat(d.forms.B, i, j) -
                                 std::tanh(rho) * Mat2::Identity())
                                    .cwiseAbs()
                                    .maxCoeff());
      }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("duality swaps I and III, fixes II, inverts B, and is involutive") {
  DualErr c1 = dual_errors(32, 64, 404);
  DualErr c2 = dual_errors(64, 128, 404);
  CHECK(c2.metric < 5e-4);
  CHECK(c2.second < 5e-4);
  CHECK(c2.shape < 1e-3);
  CHECK(c2.position < 1e-3);
  CHECK(std::log2(c1.metric / c2.metric) >= 1.8);
  CHECK(std::log2(c1.position / c2.position) >= 1.8);
}

TEST_CASE("curvature of the dual metric is K/(K+1)") {
  SphereGrid g(64, 128);
  RadialSurface s = random_radial_surface(g, 1.0, 0.1, 4, 405);
  SurfaceForms sf = fundamental_forms(embed(s));
  ScalarField K = gauss_curvature(sf.I);
  ScalarField Kd = gauss_curvature(sf.III);
  double worst = 0;
  for (int n = 0; n < g.nodes(); ++n) {
    double k = K.raw()[n][0];
    worst = std::max(worst, std::abs(Kd.raw()[n][0] - k / (k + 1.0)));
  }
  CHECK(worst < 5e-4);
}

TEST_CASE("admissibility of induced-metric targets") {
  SphereGrid g(32, 64);
  FormField I = fundamental_forms(embed(RadialSurface(g, 1.0))).I;
  Admissibility a = admissibility_I(I);
  CHECK(a.admissible);
  CHECK(a.kmin > 0);
  CHECK(a.curvature_margin > 1.0);

  // conformal round metric e^{2u} can with u = 1.5 cos(2 theta) dips below
  // K = -1 near the equator
  FormField bad = make_form(g);
  for (int i = 0; i < g.n_theta; ++i) {
    double t = g.theta(i), st = std::sin(t);
    double w = std::exp(2.0 * 1.5 * std::cos(2.0 * t));
    for (int j = 0; j < g.n_phi; ++j)
      bad.at(i, j) = Eigen::Vector3d(w, 0.0, w * st * st);
  }
  Admissibility b = admissibility_I(bad);
  CHECK_FALSE(b.admissible);
  CHECK(b.reason.find("curvature") != std::string::npos);
}

TEST_CASE("admissibility of third-form targets") {
  SphereGrid g(32, 64);
  // c^2 can with c > 1: K = 1/c^2 < 1 and shortest geodesic 2 pi c > 2 pi
  FormField h = make_form(g);
  double c = 1.2;
  for (int i = 0; i < g.n_theta; ++i) {
    double st = std::sin(g.theta(i));
    for (int j = 0; j < g.n_phi; ++j)
      h.at(i, j) = Eigen::Vector3d(c * c, 0.0, c * c * st * st);
  }
  GeodesicOptions o;
  o.random_starts = 4;
  Admissibility a = admissibility_III(h, o);
  CHECK(a.admissible);
  CHECK(a.min_geodesic == doctest::Approx(2.0 * M_PI * c).epsilon(1e-6));

  // c < 1 fails on curvature K = 1/c^2 > 1 before any geodesic search
  FormField bad = make_form(g);
  for (int i = 0; i < g.n_theta; ++i) {
    double st = std::sin(g.theta(i));
    for (int j = 0; j < g.n_phi; ++j)
      bad.at(i, j) = Eigen::Vector3d(0.25, 0.0, 0.25 * st * st);
  }
  Admissibility b = admissibility_III(bad, o);
  CHECK_FALSE(b.admissible);
  CHECK(b.reason.find("curvature") != std::string::npos);
}

TEST_CASE("closed-geodesic search: round oracle and dual lower bound") {
  SphereGrid g(32, 64);
  GeodesicOptions o;
  o.random_starts = 6;
  for (double c : {0.8, 1.3}) {
    FormField h = make_form(g);
    for (int i = 0; i < g.n_theta; ++i) {
      double st = std::sin(g.theta(i));
      for (int j = 0; j < g.n_phi; ++j)
        h.at(i, j) = Eigen::Vector3d(c * c, 0.0, c * c * st * st);
    }
    GeodesicResult r = shortest_closed_geodesic(h, o);
    CHECK(r.converged);
    CHECK(r.length == doctest::Approx(2.0 * M_PI * c).epsilon(1e-6));
  }

  // third forms of convex surfaces have all closed geodesics longer than 2 pi
  RadialSurface s = random_radial_surface(g, 1.0, 0.1, 4, 406);
  FormField III = fundamental_forms(embed(s)).III;
  GeodesicResult r = shortest_closed_geodesic(III, o);
  CHECK(r.length > 2.0 * M_PI + 1e-3);
}

TEST_CASE("dualize rejects non-convex input") {
  SphereGrid g(24, 48);
  // large high-degree perturbation loses convexity somewhere
  RadialSurface s = random_radial_surface(g, 0.4, 0.35, 4, 407);
  FrameField f = embed(s);
  SurfaceForms sf = fundamental_forms(f);
  if (!sf.nonconvex.empty()) CHECK_THROWS(dualize(f));
}
