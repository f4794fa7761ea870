#pragma once

// Equidistant (offset) surface transforms and the mixed boundary-condition
// forms a I - 2 k0 II + k0^2 III / k0^2 I - 2 k0 II + III.

#include <cmath>
#include <stdexcept>

#include "hsurf/dual.hpp"
#include "hsurf/interp.hpp"
#include "hsurf/surface.hpp"

namespace hsurf {

inline double min_principal_curvature(const ShapeField& B) {
  double k0 = std::numeric_limits<double>::infinity();
  const SphereGrid& g = B.grid();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      k0 = std::min(k0, principal_curvatures(shape_mat(B, i, j)).first);
  return k0;
}

// Pure 2x2 algebra on the forms; for inward offsets (t < 0) the validity
// condition tanh|t| <= k0 is enforced.
inline SurfaceForms offset_forms(const SurfaceForms& f, double t) {
  if (t < 0) {
    double k0 = min_principal_curvature(f.B);
    if (std::tanh(-t) > k0)
      throw std::domain_error(
          "offset_forms: inward offset beyond the focal bound tanh|t| <= k0");
  }
  const SphereGrid& g = f.I.grid();
  double c = std::cosh(t), s = std::sinh(t);
  SurfaceForms out;
  out.I = make_form(g);
  out.II = make_form(g);
  out.III = make_form(g);
  out.B = make_tensor11(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 I = form_mat(f.I, i, j), II = form_mat(f.II, i, j),
           III = form_mat(f.III, i, j);
      Mat2 It = c * c * I + 2 * c * s * II + s * s * III;
      Mat2 IIt = c * s * (I + III) + (c * c + s * s) * II;
      Mat2 IIIt = s * s * I + 2 * c * s * II + c * c * III;
      set_form_mat(out.I, i, j, It);
      set_form_mat(out.II, i, j, IIt);
      set_form_mat(out.III, i, j, IIIt);
      set_shape_mat(out.B, i, j, It.inverse() * IIt);
      if (principal_curvatures(shape_mat(out.B, i, j)).first <= 0)
        out.nonconvex.emplace_back(i, j);
    }
  return out;
}

// Flow each node a distance t along the outward normal, then re-sample as a
// radial graph over the standard grid directions.
inline RadialSurface offset_surface(const RadialSurface& s, double t,
                                    int threads = 1) {
  FrameField f = embed(s);
  if (t < 0) {
    SurfaceForms sf = fundamental_forms(f, threads);
    double k0 = min_principal_curvature(sf.B);
    if (std::tanh(-t) > k0)
      throw std::domain_error(
          "offset_surface: inward offset beyond the focal bound");
  }
  const SphereGrid& g = s.grid;
  AmbientField y(g);
  double c = std::cosh(t), sh = std::sinh(t);
  for (int n = 0; n < g.nodes(); ++n)
    y.raw()[n] = c * f.x.raw()[n] - sh * f.N.raw()[n];  // -N is outward
  RadialResampleResult rr = resample_radial(y, threads);
  if (!rr.ok)
    throw std::runtime_error(
        "offset_surface: radial-graph property lost after the flow");
  return rr.surface;
}

// ---------------------------------------------------------------------------
// Mixed forms of the two boundary-condition families.

enum class MixedVariant { corI, corIII };

struct MixedForm {
  FormField h;
  Admissibility adm;
};

inline MixedForm mixed_form(const SurfaceForms& f, double k0,
                            MixedVariant variant,
                            const GeodesicOptions& gopts = {}) {
  if (!(k0 > 0.0 && k0 < 1.0))
    throw std::domain_error("mixed_form: k0 must lie in (0,1)");
  const SphereGrid& g = f.I.grid();
  MixedForm out;
  out.h = make_form(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 I = form_mat(f.I, i, j), II = form_mat(f.II, i, j),
           III = form_mat(f.III, i, j);
      Mat2 h = (variant == MixedVariant::corI)
                   ? Mat2(I - 2 * k0 * II + k0 * k0 * III)
                   : Mat2(k0 * k0 * I - 2 * k0 * II + III);
      set_form_mat(out.h, i, j, h);
    }

  double fac = 1.0 - k0 * k0;
  ScalarField K = gauss_curvature(out.h);
  double kmin = K.raw()[0][0], kmax = kmin;
  for (const auto& v : K.raw()) {
    kmin = std::min(kmin, v[0]);
    kmax = std::max(kmax, v[0]);
  }
  out.adm.kmin = kmin;
  out.adm.kmax = kmax;
  if (variant == MixedVariant::corI) {
    out.adm.curvature_margin = kmin + 1.0 / fac;
    out.adm.admissible = out.adm.curvature_margin > 0;
    if (!out.adm.admissible)
      out.adm.reason = "curvature K <= -1/(1-k0^2) somewhere";
  } else {
    out.adm.curvature_margin = 1.0 / fac - kmax;
    if (out.adm.curvature_margin <= 0) {
      out.adm.admissible = false;
      out.adm.reason = "curvature K >= 1/(1-k0^2) somewhere";
    } else {
      GeodesicResult gr = shortest_closed_geodesic(out.h, gopts);
      out.adm.min_geodesic = gr.length;
      out.adm.geodesic_margin = gr.length - 2.0 * M_PI * std::sqrt(fac);
      out.adm.admissible = out.adm.geodesic_margin > 0;
      if (!out.adm.admissible)
        out.adm.reason = "closed geodesic not longer than 2*pi*sqrt(1-k0^2)";
    }
  }
  return out;
}

}  // namespace hsurf
