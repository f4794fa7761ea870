#include <doctest.h>

#include "hsurf/flows.hpp"
#include "hsurf/random_surface.hpp"

using namespace hsurf;

namespace {

// exact closed-form sphere data I = sinh^2 can, II = sinh cosh can,
// III = cosh^2 can, B = coth Id
SurfaceForms sphere_forms(const SphereGrid& g, double rho) {
  double s = std::sinh(rho), c = std::cosh(rho);
  SurfaceForms f;
  f.I = make_form(g);
  f.II = make_form(g);
  f.III = make_form(g);
  f.B = make_tensor11(g);
  for (int i = 0; i < g.n_theta; ++i) {
    double st = std::sin(g.theta(i));
    Mat2 can;
    can << 1, 0, 0, st * st;
    for (int j = 0; j < g.n_phi; ++j) {
      set_form_mat(f.I, i, j, s * s * can);
      set_form_mat(f.II, i, j, s * c * can);
      set_form_mat(f.III, i, j, c * c * can);
      set_shape_mat(f.B, i, j, (c / s) * Mat2::Identity());
    }
  }
  return f;
}

double form_distance(const FormField& a, const FormField& b) {
  double w = 0;
  const SphereGrid& g = a.grid();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 ma = form_mat(a, i, j), mb = form_mat(b, i, j);
      w = std::max(w, (ma - mb).cwiseAbs().maxCoeff() /
                          std::max(1.0, mb.cwiseAbs().maxCoeff()));
    }
  return w;
}

}  // namespace

TEST_CASE("offsets of geodesic spheres shift the radius exactly") {
  SphereGrid g(32, 64);
  double rho = 1.0;
  for (double t : {0.4, -0.3}) {
    SurfaceForms ft = offset_forms(sphere_forms(g, rho), t);
    SurfaceForms ref = sphere_forms(g, rho + t);
    CHECK(form_distance(ft.I, ref.I) < 1e-10);
    CHECK(form_distance(ft.II, ref.II) < 1e-10);
    CHECK(form_distance(ft.III, ref.III) < 1e-10);
    double wb = 0;
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j)
        wb = std::max(wb, (shape_mat(ft.B, i, j) -
                           std::cosh(rho + t) / std::sinh(rho + t) *
                               Mat2::Identity())
                              .cwiseAbs()
                              .maxCoeff());
    CHECK(wb < 1e-10);
    CHECK(ft.nonconvex.empty());
  }
}

TEST_CASE("form algebra and normal flow give the same offset surface") {
  SphereGrid g(32, 64);
  RadialSurface s = random_radial_surface(g, 1.0, 0.1, 3, 71);
  double t = 0.3;
  SurfaceForms alg = offset_forms(fundamental_forms(embed(s)), t);
  RadialSurface st = offset_surface(s, t);
  SurfaceForms flow = fundamental_forms(embed(st));
  // the two pipelines parameterize the offset surface by different charts
  // (normal flow vs radial graph), so compare chart-invariant quantities
  CHECK(surface_area(alg.I) ==
        doctest::Approx(surface_area(flow.I)).epsilon(1e-4));
  auto k_range = [](const ShapeField& B) {
    const SphereGrid& g = B.grid();
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j) {
        auto [k1, k2] = principal_curvatures(shape_mat(B, i, j));
        lo = std::min(lo, k1);
        hi = std::max(hi, k2);
      }
    return std::pair<double, double>(lo, hi);
  };
  auto [a_lo, a_hi] = k_range(alg.B);
  auto [f_lo, f_hi] = k_range(flow.B);
  CHECK(a_lo == doctest::Approx(f_lo).epsilon(1e-3));
  CHECK(a_hi == doctest::Approx(f_hi).epsilon(1e-3));

  // on a sphere the flow is purely radial and the resample is exact
  RadialSurface rt = offset_surface(RadialSurface(g, 1.0), 0.4);
  for (const auto& v : rt.rho.raw())
    CHECK(v[0] == doctest::Approx(1.4).epsilon(1e-9));
}

TEST_CASE("inward offsets past the focal bound are rejected") {
  SphereGrid g(16, 32);
  // synthetic convex data with principal curvature 1/2 everywhere
  SurfaceForms f = sphere_forms(g, 1.0);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      set_form_mat(f.II, i, j, 0.5 * form_mat(f.I, i, j));
      set_shape_mat(f.B, i, j, 0.5 * Mat2::Identity());
    }
  double ok = -std::atanh(0.4), bad = -std::atanh(0.6);
  CHECK_NOTHROW(offset_forms(f, ok));
  CHECK_THROWS_AS(offset_forms(f, bad), std::domain_error);
  // real spheres have coth(rho) > 1, so every inward offset is valid
  CHECK_NOTHROW(offset_forms(sphere_forms(g, 0.5), -2.0));
  CHECK_THROWS_AS(offset_surface(RadialSurface(g, 1.0), -1.5),
                  std::runtime_error);  // flows through the center
}

TEST_CASE("mixed forms are scaled offset forms") {
  // I - 2 k0 II + k0^2 III = (1-k0^2) I_{-t0} and
  // k0^2 I - 2 k0 II + III = (1-k0^2) III_{-t0} with tanh(t0) = k0
  SphereGrid g(24, 48);
  SurfaceForms f = fundamental_forms(embed(random_radial_surface(g, 1.0, 0.08, 3, 72)));
  double k0 = 0.2, t0 = std::atanh(k0), fac = 1.0 - k0 * k0;
  SurfaceForms off = offset_forms(f, -t0);
  GeodesicOptions go;
  go.random_starts = 0;
  MixedForm mI = mixed_form(f, k0, MixedVariant::corI, go);
  MixedForm mIII = mixed_form(f, k0, MixedVariant::corIII, go);
  FormField sI = make_form(g), sIII = make_form(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      set_form_mat(sI, i, j, fac * form_mat(off.I, i, j));
      set_form_mat(sIII, i, j, fac * form_mat(off.III, i, j));
    }
  CHECK(form_distance(mI.h, sI) < 1e-12);
  CHECK(form_distance(mIII.h, sIII) < 1e-12);
}

TEST_CASE("mixed forms approach I and III as k0 vanishes") {
  SphereGrid g(24, 48);
  SurfaceForms f = fundamental_forms(embed(random_radial_surface(g, 1.0, 0.08, 3, 73)));
  GeodesicOptions go;
  go.random_starts = 0;
  MixedForm mI = mixed_form(f, 1e-8, MixedVariant::corI, go);
  MixedForm mIII = mixed_form(f, 1e-8, MixedVariant::corIII, go);
  CHECK(form_distance(mI.h, f.I) < 1e-6);
  CHECK(form_distance(mIII.h, f.III) < 1e-6);
}

TEST_CASE("mixed-form admissibility on the round sphere") {
  SphereGrid g(24, 48);
  double rho = 1.0, k0 = 0.3, t0 = std::atanh(k0), fac = 1.0 - k0 * k0;
  SurfaceForms f = sphere_forms(g, rho);
  GeodesicOptions go;
  go.random_starts = 2;
  MixedForm mI = mixed_form(f, k0, MixedVariant::corI, go);
  CHECK(mI.adm.admissible);
  // h = (1-k0^2) sinh^2(rho - t0) can has K = 1/((1-k0^2) sinh^2) > 0
  double expectK = 1.0 / (fac * std::sinh(rho - t0) * std::sinh(rho - t0));
  CHECK(mI.adm.kmin == doctest::Approx(expectK).epsilon(1e-3));

  MixedForm mIII = mixed_form(f, k0, MixedVariant::corIII, go);
  CHECK(mIII.adm.admissible);
  // round metric of radius sqrt(fac) cosh(rho - t0): the equator is the
  // shortest closed geodesic and clears the 2 pi sqrt(fac) threshold
  double c = std::sqrt(fac) * std::cosh(rho - t0);
  CHECK(mIII.adm.min_geodesic == doctest::Approx(2.0 * M_PI * c).epsilon(1e-5));
  CHECK(mIII.adm.geodesic_margin > 0);
}

TEST_CASE("mixed forms reject k0 outside (0,1)") {
  SphereGrid g(16, 32);
  SurfaceForms f = sphere_forms(g, 1.0);
  for (double k0 : {0.0, 1.0, -0.2, 1.7})
    CHECK_THROWS_AS(mixed_form(f, k0, MixedVariant::corI), std::domain_error);
}
