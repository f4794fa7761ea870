#pragma once

// Discrete radial convex surfaces in H^3 and their Klein images in R^3:
// frames, fundamental forms I/II/III, shape operator, Christoffel symbols,
// intrinsic curvature, Gauss-Codazzi residuals, and the connections of the
// second and third fundamental forms.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsurf/grid.hpp"
#include "hsurf/lorentz.hpp"
#include "hsurf/projective.hpp"

namespace hsurf {

// Symmetric 2x2 form in the (theta,phi) chart: components (E, F, G) with
// theta-parities (+,-,+).
using FormField = GridField<3>;
// (1,1)-tensor in the chart: components (Btt, Btp, Bpt, Bpp), parities
// (+,-,-,+).
using ShapeField = GridField<4>;
// Connection coefficients Gamma^c_{ab}, index 4c+2a+b, parity (-1)^{#theta}.
using ConnField = GridField<8>;

inline FormField make_form(const SphereGrid& g) {
  return FormField(g, Eigen::Vector3d(1, -1, 1));
}
inline ShapeField make_tensor11(const SphereGrid& g) {
  return ShapeField(g, Eigen::Vector4d(1, -1, -1, 1));
}
inline ConnField make_conn(const SphereGrid& g) {
  Eigen::Matrix<double, 8, 1> p;
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        int nt = (c == 0) + (a == 0) + (b == 0);
        p[4 * c + 2 * a + b] = (nt % 2 == 0) ? 1.0 : -1.0;
      }
  return ConnField(g, p);
}

inline Mat2 form_mat(const FormField& f, int i, int j) {
  auto v = f.at(i, j);
  Mat2 m;
  m << v[0], v[1], v[1], v[2];
  return m;
}
inline void set_form_mat(FormField& f, int i, int j, const Mat2& m) {
  f.at(i, j) = Eigen::Vector3d(m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), m(1, 1));
}
inline Mat2 shape_mat(const ShapeField& b, int i, int j) {
  auto v = b.at(i, j);
  Mat2 m;
  m << v[0], v[1], v[2], v[3];
  return m;
}
inline void set_shape_mat(ShapeField& b, int i, int j, const Mat2& m) {
  b.at(i, j) = Eigen::Vector4d(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
}

// ---------------------------------------------------------------------------

struct RadialSurface {
  SphereGrid grid;
  ScalarField rho;

  RadialSurface() = default;
  explicit RadialSurface(const SphereGrid& g, double rho0 = 1.0)
      : grid(g), rho(g) {
    for (auto& v : rho.raw()) v[0] = rho0;
  }
};

// Ambient frame: position x in H3, chart tangents, interior unit normal.
struct FrameField {
  SphereGrid grid;
  AmbientField x, xth, xph, N;
};

// Same for a chart surface in R^3 (e.g. a Klein image).
struct Frame3Field {
  SphereGrid grid;
  Ambient3Field x, xth, xph, N;
};

namespace detail {
inline Eigen::Vector4d minus_ones4() { return -Eigen::Vector4d::Ones(); }
inline Eigen::Vector3d minus_ones3() { return -Eigen::Vector3d::Ones(); }
}  // namespace detail

// Geodesic-ray embedding x = cosh(rho) e0 + sinh(rho) d(theta,phi).
// Tangents: semi-analytic by default (finite differences of rho only, chart
// derivatives of the direction analytic); fd_tangents takes plain centered
// differences of the positions instead.
enum class RhoDerivative { spectral, stencil };

inline FrameField embed(const RadialSurface& s, bool fd_tangents = false,
                        int threads = 1,
                        RhoDerivative rd = RhoDerivative::spectral) {
  const SphereGrid& g = s.grid;
  FrameField f;
  f.grid = g;
  f.x = AmbientField(g);
  // a whole ambient vector that is a d/dtheta of a plain field flips sign
  // across the pole
  f.xth = AmbientField(g, detail::minus_ones4());
  f.xph = AmbientField(g);
  f.N = AmbientField(g);

  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      double r = s.rho.at(i, j)[0];
      if (r <= 0.0) throw std::invalid_argument("embed: rho must be positive");
      Vec3 d = g.dir(i, j);
      f.x.at(i, j) = lift(std::cosh(r), std::sinh(r) * d);
    }

  if (fd_tangents) {
    f.xth = d_theta(f.x);
    f.xph = d_phi(f.x);
  } else {
    ScalarField rth = rd == RhoDerivative::spectral
                          ? spectral_derivative(s.rho, 1, 0)
                          : d_theta(s.rho);
    ScalarField rph = rd == RhoDerivative::spectral
                          ? spectral_derivative(s.rho, 0, 1)
                          : d_phi(s.rho);
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j) {
        double r = s.rho.at(i, j)[0];
        double c = std::cosh(r), sh = std::sinh(r);
        Vec3 d = g.dir(i, j);
        Vec4 radial = lift(sh, c * d);  // d/drho of the embedding
        f.xth.at(i, j) = rth.at(i, j)[0] * radial + lift(0.0, sh * g.dir_theta(i, j));
        f.xph.at(i, j) = rph.at(i, j)[0] * radial + lift(0.0, sh * g.dir_phi(i, j));
      }
  }

  parallel_for(g.nodes(), threads, [&](int n) {
    int i = n / g.n_phi, j = n % g.n_phi;
    Vec4 x = f.x.at(i, j);
    Vec4 nn = tangent_cross(x, f.xth.at(i, j), f.xph.at(i, j));
    double n2 = mink(nn, nn);
    if (n2 < 1e-20) throw std::runtime_error("embed: degenerate tangents");
    nn /= std::sqrt(n2);
    // interior normal: negative pairing with the outward radial direction
    double r = s.rho.at(i, j)[0];
    Vec4 radial = lift(std::sinh(r), std::cosh(r) * g.dir(i, j));
    if (mink(nn, radial) > 0) nn = -nn;
    f.N.at(i, j) = nn;
  });
  return f;
}

// Solver-grade embedding: the rho derivatives are the centered stencils, so
// Jacobians assembled from the same stencil matrices are exact.
inline FrameField embed_stencil(const RadialSurface& s, int threads = 1) {
  return embed(s, false, threads, RhoDerivative::stencil);
}

// ---------------------------------------------------------------------------
// Fundamental forms.

struct SurfaceForms {
  FormField I, II, III;
  ShapeField B;
  double max_asym = 0.0;  // pre-symmetrization defect of II
  std::vector<std::pair<int, int>> nonconvex;  // nodes with k_min <= 0
};

inline std::pair<double, double> principal_curvatures(const Mat2& b) {
  double tr = b.trace(), det = b.determinant();
  double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
  return {tr / 2.0 - disc, tr / 2.0 + disc};
}

inline SurfaceForms fundamental_forms(const FrameField& f, int threads = 1) {
  const SphereGrid& g = f.grid;
  SurfaceForms out;
  out.I = make_form(g);
  out.II = make_form(g);
  out.III = make_form(g);
  out.B = make_tensor11(g);

  // normal derivatives spectrally: ambient components extend smoothly to the
  // doubled torus, and the intrinsic curvature of III amplifies any pole-row
  // truncation noise in II by inverse powers of sin(theta)
  AmbientField nth = spectral_derivative(f.N, 1, 0);
  AmbientField nph = spectral_derivative(f.N, 0, 1);
  std::vector<double> asym(g.nodes(), 0.0);
  std::vector<char> bad(g.nodes(), 0);

  parallel_for(g.nodes(), threads, [&](int n) {
    int i = n / g.n_phi, j = n % g.n_phi;
    Vec4 xt = f.xth.at(i, j), xp = f.xph.at(i, j);
    Mat2 I;
    I << mink(xt, xt), mink(xt, xp), mink(xt, xp), mink(xp, xp);
    // II(x_a, x_b) = -<d_a N, x_b>; the ambient correction along x is killed
    // by the tangent pairing
    Mat2 II;
    II << -mink(nth.at(i, j), xt), -mink(nth.at(i, j), xp),
        -mink(nph.at(i, j), xt), -mink(nph.at(i, j), xp);
    asym[n] = std::abs(II(0, 1) - II(1, 0));
    Mat2 IIs = 0.5 * (II + II.transpose());
    Mat2 B = I.inverse() * IIs;
    Mat2 III = B.transpose() * I * B;
    set_form_mat(out.I, i, j, I);
    set_form_mat(out.II, i, j, IIs);
    set_form_mat(out.III, i, j, III);
    set_shape_mat(out.B, i, j, B);
    if (principal_curvatures(B).first <= 0.0) bad[n] = 1;
  });
  for (int n = 0; n < g.nodes(); ++n) {
    out.max_asym = std::max(out.max_asym, asym[n]);
    if (bad[n]) out.nonconvex.emplace_back(n / g.n_phi, n % g.n_phi);
  }
  return out;
}

// Euclidean version of the pipeline for chart surfaces in R^3.
inline SurfaceForms euclidean_forms(const Frame3Field& f, int threads = 1) {
  const SphereGrid& g = f.grid;
  SurfaceForms out;
  out.I = make_form(g);
  out.II = make_form(g);
  out.III = make_form(g);
  out.B = make_tensor11(g);

  Ambient3Field nth = spectral_derivative(f.N, 1, 0);
  Ambient3Field nph = spectral_derivative(f.N, 0, 1);
  std::vector<char> bad(g.nodes(), 0);
  std::vector<double> asym(g.nodes(), 0.0);
  parallel_for(g.nodes(), threads, [&](int n) {
    int i = n / g.n_phi, j = n % g.n_phi;
    Vec3 xt = f.xth.at(i, j), xp = f.xph.at(i, j);
    Mat2 I;
    I << xt.dot(xt), xt.dot(xp), xt.dot(xp), xp.dot(xp);
    Mat2 II;
    II << -nth.at(i, j).dot(xt), -nth.at(i, j).dot(xp),
        -nph.at(i, j).dot(xt), -nph.at(i, j).dot(xp);
    asym[n] = std::abs(II(0, 1) - II(1, 0));
    Mat2 IIs = 0.5 * (II + II.transpose());
    Mat2 B = I.inverse() * IIs;
    set_form_mat(out.I, i, j, I);
    set_form_mat(out.II, i, j, IIs);
    set_form_mat(out.III, i, j, B.transpose() * I * B);
    set_shape_mat(out.B, i, j, B);
    if (principal_curvatures(B).first <= 0.0) bad[n] = 1;
  });
  for (int n = 0; n < g.nodes(); ++n) {
    out.max_asym = std::max(out.max_asym, asym[n]);
    if (bad[n]) out.nonconvex.emplace_back(n / g.n_phi, n % g.n_phi);
  }
  return out;
}

// Klein image of a hyperbolic frame, with exact chain-rule tangents.
inline Frame3Field klein_image(const FrameField& f) {
  const SphereGrid& g = f.grid;
  Frame3Field out;
  out.grid = g;
  out.x = Ambient3Field(g);
  out.xth = Ambient3Field(g, detail::minus_ones3());
  out.xph = Ambient3Field(g);
  out.N = Ambient3Field(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Vec4 x = f.x.at(i, j);
      out.x.at(i, j) = spatial(x) / x[0];
      out.xth.at(i, j) = dphi(x, f.xth.at(i, j));
      out.xph.at(i, j) = dphi(x, f.xph.at(i, j));
      Vec3 nn = out.xth.at(i, j).cross(out.xph.at(i, j));
      nn.normalize();
      if (nn.dot(out.x.at(i, j)) > 0) nn = -nn;  // interior normal
      out.N.at(i, j) = nn;
    }
  return out;
}

// Predicted second fundamental form of the Klein image: the chart components
// of II rescaled nodewise by <Nbar, dphi(N)> (the chart parameterization is
// shared, so the pushforward is the identity on components).
inline FormField projective_II_transform(const FrameField& f,
                                         const FormField& II) {
  Frame3Field img = klein_image(f);
  const SphereGrid& g = f.grid;
  FormField out = make_form(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      double c = img.N.at(i, j).dot(dphi(f.x.at(i, j), f.N.at(i, j)));
      out.at(i, j) = c * II.at(i, j);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Christoffel symbols, curvature, and the three connections.

// Christoffel symbols of a chart metric.  Spectral derivatives: the inverse
// metric amplifies derivative error by 1/sin^2(theta) near the poles, which
// would cost the centered stencils their uniform convergence order.
inline ConnField christoffels(const FormField& gmet) {
  const SphereGrid& g = gmet.grid();
  auto [gth, gph] = spectral_derivatives(gmet);
  ConnField out = make_conn(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 gm = form_mat(gmet, i, j);
      Mat2 gi = gm.inverse();
      // dg[a](b,c) = d_a g_{bc}
      Mat2 dg[2] = {form_mat(gth, i, j), form_mat(gph, i, j)};
      auto& v = out.at(i, j);
      for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            double s = 0;
            for (int d = 0; d < 2; ++d)
              s += 0.5 * gi(c, d) *
                   (dg[a](d, b) + dg[b](d, a) - dg[d](a, b));
            v[4 * c + 2 * a + b] = s;
          }
    }
  return out;
}

// Curvature scalar of a connection with respect to a metric:
// K = g(R(e_theta,e_phi) e_phi, e_theta) / det g.
inline ScalarField connection_curvature(const ConnField& conn,
                                        const FormField& gmet) {
  const SphereGrid& g = gmet.grid();
  ConnField cth = d_theta(conn), cph = d_phi(conn);
  ScalarField out(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      auto G = [&](const ConnField::Value& v, int c, int a, int b) {
        return v[4 * c + 2 * a + b];
      };
      auto v0 = conn.at(i, j);
      auto vt = cth.at(i, j), vp = cph.at(i, j);
      // R^c_{phi theta phi} = dth G^c_{phi phi} - dph G^c_{theta phi}
      //                        + G^c_{theta e} G^e_{phi phi}
      //                        - G^c_{phi e} G^e_{theta phi}
      double R[2];
      for (int c = 0; c < 2; ++c) {
        double s = G(vt, c, 1, 1) - G(vp, c, 0, 1);
        for (int e = 0; e < 2; ++e)
          s += G(v0, c, 0, e) * G(v0, e, 1, 1) -
               G(v0, c, 1, e) * G(v0, e, 0, 1);
        R[c] = s;
      }
      Mat2 gm = form_mat(gmet, i, j);
      out.at(i, j)[0] =
          (gm(0, 0) * R[0] + gm(0, 1) * R[1]) / gm.determinant();
    }
  return out;
}

// Intrinsic curvature by the Brioschi formula.  All metric derivatives are
// spectral: Christoffel-based routes differentiate pole-singular data
// (cot-like coefficients), which destroys the uniform convergence order near
// the poles; the chart metric components themselves are smooth on the
// doubled torus, so this route keeps the pole rows at full accuracy.
inline ScalarField gauss_curvature(const FormField& gmet) {
  const SphereGrid& g = gmet.grid();
  FormField g10 = spectral_derivative(gmet, 1, 0);
  FormField g01 = spectral_derivative(gmet, 0, 1);
  FormField g20 = spectral_derivative(gmet, 2, 0);
  FormField g11 = spectral_derivative(gmet, 1, 1);
  FormField g02 = spectral_derivative(gmet, 0, 2);
  ScalarField out(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      double E = gmet.at(i, j)[0], F = gmet.at(i, j)[1], G = gmet.at(i, j)[2];
      double Eu = g10.at(i, j)[0], Ev = g01.at(i, j)[0];
      double Fu = g10.at(i, j)[1], Fv = g01.at(i, j)[1];
      double Gu = g10.at(i, j)[2], Gv = g01.at(i, j)[2];
      double Evv = g02.at(i, j)[0], Fuv = g11.at(i, j)[1],
             Guu = g20.at(i, j)[2];
      Eigen::Matrix3d M1, M2;
      M1 << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
          Fv - 0.5 * Gu, E, F,
          0.5 * Gv, F, G;
      M2 << 0.0, 0.5 * Ev, 0.5 * Gu,
          0.5 * Ev, E, F,
          0.5 * Gu, F, G;
      double det = E * G - F * F;
      out.at(i, j)[0] = (M1.determinant() - M2.determinant()) / (det * det);
    }
  return out;
}

// Connection of the third fundamental form: nabla~_X Y = B^{-1} nabla_X (BY).
inline ConnField connection_III(const ConnField& conn_I, const ShapeField& B) {
  const SphereGrid& g = B.grid();
  ShapeField bth = d_theta(B), bph = d_phi(B);
  ConnField out = make_conn(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 b = shape_mat(B, i, j);
      Mat2 bi = b.inverse();
      Mat2 db[2];
      {
        auto t = bth.at(i, j);
        auto p = bph.at(i, j);
        db[0] << t[0], t[1], t[2], t[3];
        db[1] << p[0], p[1], p[2], p[3];
      }
      auto v0 = conn_I.at(i, j);
      auto& v = out.at(i, j);
      for (int a = 0; a < 2; ++a) {
        // M^c_b = (nabla_a (B e_b))^c = d_a B^c_b + G^c_{a e} B^e_b
        Mat2 m = db[a];
        for (int c = 0; c < 2; ++c)
          for (int bb = 0; bb < 2; ++bb)
            for (int e = 0; e < 2; ++e)
              m(c, bb) += v0[4 * c + 2 * a + e] * b(e, bb);
        Mat2 gt = bi * m;
        for (int c = 0; c < 2; ++c)
          for (int bb = 0; bb < 2; ++bb) v[4 * c + 2 * a + bb] = gt(c, bb);
      }
    }
  return out;
}

// Connection of II: the average of the connections of I and III.
inline ConnField connection_II(const ConnField& conn_I,
                               const ConnField& conn_III) {
  const SphereGrid& g = conn_I.grid();
  ConnField out = make_conn(g);
  for (int n = 0; n < g.nodes(); ++n)
    out.raw()[n] = 0.5 * (conn_I.raw()[n] + conn_III.raw()[n]);
  return out;
}

// Exterior covariant derivative of a (1,1)-tensor field:
// (d^G h)^c = (nabla_theta h)^c_phi - (nabla_phi h)^c_theta.
inline GridField<2> d_nabla(const ShapeField& h, const ConnField& conn) {
  const SphereGrid& g = h.grid();
  ShapeField hth = d_theta(h), hph = d_phi(h);
  GridField<2> out(g, Eigen::Vector2d(1, -1));
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 hm = shape_mat(h, i, j);
      Mat2 dh[2];
      {
        auto t = hth.at(i, j);
        auto p = hph.at(i, j);
        dh[0] << t[0], t[1], t[2], t[3];
        dh[1] << p[0], p[1], p[2], p[3];
      }
      auto v0 = conn.at(i, j);
      auto G = [&](int c, int a, int b) { return v0[4 * c + 2 * a + b]; };
      // (nabla_a h)^c_b = d_a h^c_b + G^c_{a e} h^e_b - G^e_{a b} h^c_e
      auto cov = [&](int a, int c, int b) {
        double s = dh[a](c, b);
        for (int e = 0; e < 2; ++e)
          s += G(c, a, e) * hm(e, b) - G(e, a, b) * hm(c, e);
        return s;
      };
      out.at(i, j)[0] = cov(0, 0, 1) - cov(1, 0, 0);
      out.at(i, j)[1] = cov(0, 1, 1) - cov(1, 1, 0);
    }
  return out;
}

// Codazzi residual d^nabla B (nabla = connection of I) and Gauss residual
// det B - (K + 1).
struct GaussCodazzi {
  ScalarField gauss;    // det B - (K+1)
  ScalarField codazzi;  // euclidean norm of (d^nabla B)^c
};

inline GaussCodazzi gauss_codazzi_residuals(const FormField& I,
                                            const ShapeField& B) {
  const SphereGrid& g = I.grid();
  GaussCodazzi out{ScalarField(g), ScalarField(g)};
  ScalarField K = gauss_curvature(I);
  GridField<2> dc = d_nabla(B, christoffels(I));
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      out.gauss.at(i, j)[0] =
          shape_mat(B, i, j).determinant() - (K.at(i, j)[0] + 1.0);
      out.codazzi.at(i, j)[0] = dc.at(i, j).norm();
    }
  return out;
}

// Torsion residual of a ConnField: max |G^c_{ab} - G^c_{ba}|.
inline double torsion_residual(const ConnField& conn) {
  double m = 0;
  for (const auto& v : conn.raw())
    for (int c = 0; c < 2; ++c)
      m = std::max(m, std::abs(v[4 * c + 1] - v[4 * c + 2]));
  return m;
}

inline double surface_area(const FormField& I) {
  const SphereGrid& g = I.grid();
  ScalarField dens(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      dens.at(i, j)[0] = std::sqrt(form_mat(I, i, j).determinant());
  return integrate(dens);
}

}  // namespace hsurf
