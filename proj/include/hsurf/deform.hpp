#pragma once

// Linearized isometric-deformation calculus: first variations of the induced
// metric and of the third fundamental form, the dbar operators and their
// adjoint pairing, the Bdot system, the integration construction recovering
// a deformation field from Bdot in R^3, the Herglotz certificate, and the
// discrete rigidity-kernel computation.
//
// Discretization note: all rigidity operators are built from the *discrete*
// tangents D_a x (the same centered stencils used everywhere).  Because the
// stencils are linear and Killing matrices satisfy <Ku,w> + <u,Kw> = 0,
// sampled Killing fields are annihilated to machine precision, so the
// six-dimensional kernel is exact rather than O(h^p).

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>
#include <vector>

#include "hsurf/grid.hpp"
#include "hsurf/lorentz.hpp"
#include "hsurf/projective.hpp"
#include "hsurf/surface.hpp"

namespace hsurf {

// ---------------------------------------------------------------------------
// Pointwise split u = lambda N + v^a x_a (+ off-tangent remainder).

struct DeformSplit {
  ScalarField lambda;
  GridField<2> v;          // chart components, parities (-,+)
  double max_remainder = 0.0;
};

inline DeformSplit split_deformation(const FrameField& f,
                                     const AmbientField& u) {
  const SphereGrid& g = f.grid;
  DeformSplit out{ScalarField(g), GridField<2>(g, Eigen::Vector2d(-1, 1)), 0};
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Vec4 xt = f.xth.at(i, j), xp = f.xph.at(i, j), N = f.N.at(i, j);
      Vec4 uu = u.at(i, j);
      double lam = mink(uu, N);
      Mat2 I;
      I << mink(xt, xt), mink(xt, xp), mink(xt, xp), mink(xp, xp);
      Eigen::Vector2d rhs(mink(uu, xt), mink(uu, xp));
      Eigen::Vector2d v = I.inverse() * rhs;
      out.lambda.at(i, j)[0] = lam;
      out.v.at(i, j) = v;
      Vec4 rem = uu - lam * N - v[0] * xt - v[1] * xp;
      out.max_remainder =
          std::max(out.max_remainder, std::sqrt(std::abs(mink(rem, rem))));
    }
  return out;
}

// ---------------------------------------------------------------------------
// First variation of the induced metric: deltaI_ab = <D_a u, x_b> +
// <x_a, D_b u>, with D the grid stencils applied to the ambient components
// (the quadric correction is killed by the tangential pairing).

inline FormField metric_variation(const AmbientField& x,
                                  const AmbientField& u) {
  const SphereGrid& g = x.grid();
  AmbientField xt = d_theta(x), xp = d_phi(x);
  AmbientField ut = d_theta(u), up = d_phi(u);
  FormField out = make_form(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Vec4 a = xt.at(i, j), b = xp.at(i, j);
      Vec4 da = ut.at(i, j), db = up.at(i, j);
      out.at(i, j) = Eigen::Vector3d(2.0 * mink(da, a),
                                     mink(da, b) + mink(a, db),
                                     2.0 * mink(db, b));
    }
  return out;
}

// Euclidean analogue on chart surfaces in R^3 (Lie derivative of the flat
// metric restricted to the surface).
inline FormField metric_variation3(const Ambient3Field& x,
                                   const Ambient3Field& u) {
  const SphereGrid& g = x.grid();
  Ambient3Field xt = d_theta(x), xp = d_phi(x);
  Ambient3Field ut = d_theta(u), up = d_phi(u);
  FormField out = make_form(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Vec3 a = xt.at(i, j), b = xp.at(i, j);
      Vec3 da = ut.at(i, j), db = up.at(i, j);
      out.at(i, j) = Eigen::Vector3d(2.0 * da.dot(a), da.dot(b) + a.dot(db),
                                     2.0 * db.dot(b));
    }
  return out;
}

// Linearized unit normal.  deltaN is the unique vector with the pairings
// <dN,x> = -<N,u>, <dN,x_a> = -<N,D_a u>, <dN,N> = 0 against the discrete
// basis {x, x_theta, x_phi, N}; for u sampled from a Killing field K this
// reproduces K N exactly.
inline AmbientField normal_variation(const AmbientField& x,
                                     const AmbientField& N,
                                     const AmbientField& u) {
  const SphereGrid& g = x.grid();
  AmbientField xt = d_theta(x), xp = d_phi(x);
  AmbientField ut = d_theta(u), up = d_phi(u);
  AmbientField out(g);
  Mat4 J = mink_metric();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat4 E;
      E.col(0) = x.at(i, j);
      E.col(1) = xt.at(i, j);
      E.col(2) = xp.at(i, j);
      E.col(3) = N.at(i, j);
      Mat4 G = E.transpose() * J * E;
      Vec4 p(-mink(N.at(i, j), u.at(i, j)), -mink(N.at(i, j), ut.at(i, j)),
             -mink(N.at(i, j), up.at(i, j)), 0.0);
      out.at(i, j) = E * G.inverse() * p;
    }
  return out;
}

// First variation of III, computed as the induced-metric variation of the
// dual surface (positions -N, deformation -deltaN); the two signs cancel.
inline FormField third_form_variation(const FrameField& f,
                                      const AmbientField& u) {
  AmbientField dN = normal_variation(f.x, f.N, u);
  return metric_variation(f.N, dN);
}

// ---------------------------------------------------------------------------
// dbar operators.

// Rotation by +90 degrees for a positive-definite form g (chart matrix):
// (X, JX) is positively oriented in the chart.
inline Mat2 rotation_J(const Mat2& g) {
  double s = std::sqrt(g.determinant());
  Mat2 J;
  J << -g(0, 1), -g(1, 1), g(0, 0), g(0, 1);
  return J / s;
}

// (dbar v)(X) = Gamma-covariant derivative of the chart vector field v,
// anti-holomorphically symmetrized with the rotation of II:
// h = nabla v + J (nabla v) J  as (1,1)-tensors, (nabla v)^a_b = nabla_b v^a.
inline ShapeField dbar(const GridField<2>& v, const ConnField& conn,
                       const FormField& II) {
  const SphereGrid& g = v.grid();
  GridField<2> vt = d_theta(v), vp = d_phi(v);
  ShapeField out = make_tensor11(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      auto c = conn.at(i, j);
      Eigen::Vector2d vv = v.at(i, j);
      Mat2 grad;  // grad(a,b) = nabla_b v^a
      Eigen::Vector2d dv[2] = {vt.at(i, j), vp.at(i, j)};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double s = dv[b][a];
          for (int e = 0; e < 2; ++e) s += c[4 * a + 2 * b + e] * vv[e];
          grad(a, b) = s;
        }
      Mat2 Jm = rotation_J(form_mat(II, i, j));
      set_shape_mat(out, i, j, grad + Jm * grad * Jm);
    }
  return out;
}

inline ShapeField dbar_I(const GridField<2>& v, const ConnField& conn_I,
                         const FormField& II) {
  return dbar(v, conn_I, II);
}
inline ShapeField dbar_III(const GridField<2>& w, const ConnField& conn_III,
                           const FormField& II) {
  return dbar(w, conn_III, II);
}

// Anti-holomorphy defect: max |h J + J h| and max |tr h| over nodes.
inline std::pair<double, double> antihol_residual(const ShapeField& h,
                                                  const FormField& II) {
  double anti = 0, tr = 0;
  const SphereGrid& g = h.grid();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 hm = shape_mat(h, i, j);
      Mat2 Jm = rotation_J(form_mat(II, i, j));
      anti = std::max(anti, (hm * Jm + Jm * hm).cwiseAbs().maxCoeff());
      tr = std::max(tr, std::abs(hm.trace()));
    }
  return {anti, tr};
}

// ---------------------------------------------------------------------------
// The Bdot system: d^nabla Bdot = 0, tr(B^{-1} Bdot) = 0.

struct BdotResiduals {
  ScalarField codazzi;  // norm of (d^nabla Bdot)^c
  ScalarField trace;    // tr(B^{-1} Bdot)
};

inline BdotResiduals bdot_residuals(const ShapeField& B, const ShapeField& Bd,
                                    const ConnField& conn_I) {
  const SphereGrid& g = B.grid();
  BdotResiduals out{ScalarField(g), ScalarField(g)};
  GridField<2> dc = d_nabla(Bd, conn_I);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      out.codazzi.at(i, j)[0] = dc.at(i, j).norm();
      out.trace.at(i, j)[0] =
          (shape_mat(B, i, j).inverse() * shape_mat(Bd, i, j)).trace();
    }
  return out;
}

// ---------------------------------------------------------------------------
// Adjoint pairing defect of J dbar_III against -d^nabla:
//   int <J dbar_III v, h>_II da_II - int II(v, -(d^nabla h)(X, JX)) da_II
// over the closed surface, with X a II-unit field and (X, JX) oriented.

inline double adjoint_residual(const GridField<2>& v, const ShapeField& h,
                               const FormField& II, const ConnField& conn_I,
                               const ConnField& conn_III) {
  const SphereGrid& g = II.grid();
  ShapeField db = dbar(v, conn_III, II);
  GridField<2> dh = d_nabla(h, conn_I);
  ScalarField dens(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 IIm = form_mat(II, i, j);
      double sd = std::sqrt(IIm.determinant());
      Mat2 Jm = rotation_J(IIm);
      Mat2 lhs_t = Jm * shape_mat(db, i, j);
      // <a,b>_II = tr(II^{-1} a^T II b)
      double lhs =
          (IIm.inverse() * lhs_t.transpose() * IIm * shape_mat(h, i, j))
              .trace();
      // (d^nabla h)(X, JX) = (1/sqrt(det II)) (d^nabla h)(d_theta, d_phi)
      Eigen::Vector2d w = dh.at(i, j) / sd;
      Eigen::Vector2d vv = v.at(i, j);
      double rhs = -(vv.transpose() * IIm * w)(0, 0);
      dens.at(i, j)[0] = (lhs - rhs) * sd;
    }
  return integrate(dens);
}

// ---------------------------------------------------------------------------
// Integration construction in R^3: from Bdot satisfying the Bdot system,
// recover the deformation field phidot with dY = (dphi o Bdot) ^ N and
// d(phidot) = Y ^ dphi.

struct IntegratedDeformation {
  Ambient3Field Y;
  Ambient3Field phidot;
  double loop_residual = 0.0;  // worst cell-loop integral of the 1-forms
};

namespace detail {
// Integrate an exact 1-form (given by its chart components alpha_theta,
// alpha_phi as 3-vector fields) over the grid from node (0,0) by trapezoid
// sums along latitude row 0 and then down each meridian; also report the
// worst elementary-cell circulation.
inline std::pair<Ambient3Field, double> integrate_oneform(
    const Ambient3Field& at, const Ambient3Field& ap) {
  const SphereGrid& g = at.grid();
  Ambient3Field F(g);
  double hth = g.dtheta(), hph = g.dphi();
  // row 0 in phi
  for (int j = 1; j < g.n_phi; ++j)
    F.at(0, j) = F.at(0, j - 1) +
                 0.5 * hph * (ap.at(0, j - 1) + ap.at(0, j));
  // meridians
  for (int j = 0; j < g.n_phi; ++j)
    for (int i = 1; i < g.n_theta; ++i)
      F.at(i, j) = F.at(i - 1, j) +
                   0.5 * hth * (at.at(i - 1, j) + at.at(i, j));
  double worst = 0;
  for (int i = 0; i + 1 < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      int j1 = (j + 1) % g.n_phi;
      Vec3 loop = 0.5 * hph * (ap.at(i, j) + ap.at(i, j1)) +
                  0.5 * hth * (at.at(i, j1) + at.at(i + 1, j1)) -
                  0.5 * hph * (ap.at(i + 1, j) + ap.at(i + 1, j1)) -
                  0.5 * hth * (at.at(i, j) + at.at(i + 1, j));
      worst = std::max(worst, loop.norm());
    }
  return {F, worst};
}
}  // namespace detail

inline IntegratedDeformation integrate_deformation(const Frame3Field& f,
                                                   const ShapeField& Bd) {
  const SphereGrid& g = f.grid;
  Ambient3Field at(g, detail::minus_ones3()), ap(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 bd = shape_mat(Bd, i, j);
      Vec3 xt = f.xth.at(i, j), xp = f.xph.at(i, j), N = f.N.at(i, j);
      // alpha_a = (dphi(Bd e_a)) x N
      at.at(i, j) = (bd(0, 0) * xt + bd(1, 0) * xp).cross(N);
      ap.at(i, j) = (bd(0, 1) * xt + bd(1, 1) * xp).cross(N);
    }
  auto [Y, r1] = detail::integrate_oneform(at, ap);
  Ambient3Field bt(g, detail::minus_ones3()), bp(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      bt.at(i, j) = Y.at(i, j).cross(f.xth.at(i, j));
      bp.at(i, j) = Y.at(i, j).cross(f.xph.at(i, j));
    }
  auto [phid, r2] = detail::integrate_oneform(bt, bp);
  IntegratedDeformation out;
  out.Y = std::move(Y);
  out.phidot = std::move(phid);
  out.loop_residual = std::max(r1, r2);
  return out;
}

// Herglotz certificate on a closed surface in R^3 star-shaped around the
// origin: the integral of d omega equals int 2 df(N) det(Bdot) da with
// f = r^2/2, so it must vanish (omega is global) while det(Bdot) <= 0
// pointwise whenever tr(B^{-1} Bdot) = 0.
struct HerglotzCertificate {
  double integral = 0.0;
  ScalarField detBdot;
};

inline HerglotzCertificate herglotz_certificate(const Frame3Field& f,
                                                const FormField& I,
                                                const ShapeField& Bd) {
  const SphereGrid& g = f.grid;
  HerglotzCertificate out{0.0, ScalarField(g)};
  ScalarField dens(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      double det = shape_mat(Bd, i, j).determinant();
      out.detBdot.at(i, j)[0] = det;
      // exterior normal -N (N interior), df = <x, .>
      double dfN = f.x.at(i, j).dot(-f.N.at(i, j));
      dens.at(i, j)[0] =
          2.0 * dfN * det * std::sqrt(form_mat(I, i, j).determinant());
    }
  out.integral = integrate(dens);
  return out;
}

// ---------------------------------------------------------------------------
// Pogorelov transfer identity:
// (L_u g)(x_a, x_b) = cosh^2(rho) (L_{Phi_H(u)} gbar)(xbar_a, xbar_b).

inline ScalarField pogorelov_transfer_residual(const FrameField& f,
                                               const AmbientField& u) {
  const SphereGrid& g = f.grid;
  FormField lhs = metric_variation(f.x, u);
  Ambient3Field p(g), ub(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      HPoint x(f.x.at(i, j));
      auto im = pogorelov_phi_H(x, u.at(i, j));
      p.at(i, j) = im.base.p;
      ub.at(i, j) = im.vec;
    }
  FormField rhs = metric_variation3(p, ub);
  ScalarField out(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      double ch2 = f.x.at(i, j)[0] * f.x.at(i, j)[0];  // cosh^2(rho)
      out.at(i, j)[0] =
          (form_mat(lhs, i, j) - ch2 * form_mat(rhs, i, j))
              .cwiseAbs()
              .maxCoeff();
    }
  return out;
}

// ---------------------------------------------------------------------------
// Killing transport: the flat connection on pairs (tau, sigma),
// D_w(tau, sigma) = (nabla_w tau + w ^ sigma, nabla_w sigma - w ^ tau),
// evaluated along a chart direction (0 = theta, 1 = phi).

inline std::pair<AmbientField, AmbientField> killing_transport_derivative(
    const AmbientField& x, const AmbientField& tau, const AmbientField& sigma,
    int dir) {
  const SphereGrid& g = x.grid();
  AmbientField xt = dir == 0 ? d_theta(x) : d_phi(x);
  AmbientField dt = dir == 0 ? d_theta(tau) : d_phi(tau);
  AmbientField ds = dir == 0 ? d_theta(sigma) : d_phi(sigma);
  AmbientField ot(g), os(g);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Vec4 xx = x.at(i, j), w = xt.at(i, j);
      // covariant derivative on H3 = tangential projection of the ambient one
      Vec4 ct = project_tangent(xx, dt.at(i, j));
      Vec4 cs = project_tangent(xx, ds.at(i, j));
      ot.at(i, j) = ct + tangent_cross(xx, w, sigma.at(i, j));
      os.at(i, j) = cs - tangent_cross(xx, w, tau.at(i, j));
    }
  return {ot, os};
}

// ---------------------------------------------------------------------------
// Rigidity operators and spectra.

enum class RigidityKind { deltaI, deltaIII, euclid };

struct RigidityOperator {
  Eigen::SparseMatrix<double> A;  // rows x 3n: coefficients -> residuals
  // hyperbolic kinds: per-node basis of the exact tangent space at the
  // working positions (the surface itself for deltaI, its dual for
  // deltaIII).  The basis is Minkowski-orthonormal up to the sign of the
  // third leg, which is timelike on the dual (eps3 = -1).
  std::vector<Eigen::Matrix<double, 4, 3>> frame;
  std::vector<Vec4> pos;  // working positions the Killing fields act on
  double eps3 = 1.0;
  RigidityKind kind = RigidityKind::deltaI;
  int n = 0;
};

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

// stencil derivative matrix on stacked per-node C-component vectors
template <int C>
inline SpMat stencil_matrix(const SphereGrid& g, bool theta_dir) {
  std::vector<Trip> t;
  double h = theta_dir ? g.dtheta() : g.dphi();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      int row = g.index(i, j);
      for (int k = -2; k <= 2; ++k) {
        double w = kStencil5[k + 2] / h;
        if (w == 0.0) continue;
        int ii, jj;
        bool flip;
        if (theta_dir)
          g.wrap(i + k, j, ii, jj, flip);
        else
          g.wrap(i, j + k, ii, jj, flip);
        int col = g.index(ii, jj);
        for (int c = 0; c < C; ++c)
          t.emplace_back(C * row + c, C * col + c, w);
      }
    }
  SpMat m(C * g.nodes(), C * g.nodes());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// per-node block-diagonal matrix from 4x3 (or 3x3) blocks
template <int R, int Cc>
inline SpMat block_diag(const std::vector<Eigen::Matrix<double, R, Cc>>& b) {
  std::vector<Trip> t;
  for (int n = 0; n < (int)b.size(); ++n)
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < Cc; ++c)
        if (b[n](r, c) != 0.0) t.emplace_back(R * n + r, Cc * n + c, b[n](r, c));
  SpMat m(R * b.size(), Cc * b.size());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// contraction rows of deltaI against given discrete tangents (ambient dim 4
// with the Minkowski metric, or 3 with the Euclidean one).  Rows are scaled
// by the inverse tangent-norm products so they measure the *relative* metric
// variation; this keeps the operator norm comparable across chart
// distortion (the scaling is a positive diagonal, so the kernel and the
// exact Killing annihilation are untouched).
template <int C>
inline std::pair<SpMat, SpMat> contraction(
    const SphereGrid& g, const std::vector<Eigen::Matrix<double, C, 1>>& xt,
    const std::vector<Eigen::Matrix<double, C, 1>>& xp) {
  std::vector<Trip> t1, t2;
  for (int n = 0; n < g.nodes(); ++n) {
    Eigen::Matrix<double, C, 1> jt = xt[n], jp = xp[n];
    if constexpr (C == 4) {
      jt[0] = -jt[0];
      jp[0] = -jp[0];
    }
    double ntt = xt[n].dot(jt), npp = xp[n].dot(jp);  // metric norms^2
    double stt = 1.0 / std::max(ntt, 1e-300);
    double spp = 1.0 / std::max(npp, 1e-300);
    double stp = std::sqrt(stt * spp);
    for (int c = 0; c < C; ++c) {
      t1.emplace_back(3 * n + 0, C * n + c, 2.0 * stt * jt[c]);
      t1.emplace_back(3 * n + 1, C * n + c, stp * jp[c]);
      t2.emplace_back(3 * n + 1, C * n + c, stp * jt[c]);
      t2.emplace_back(3 * n + 2, C * n + c, 2.0 * spp * jp[c]);
    }
  }
  SpMat c1(3 * g.nodes(), C * g.nodes()), c2(3 * g.nodes(), C * g.nodes());
  c1.setFromTriplets(t1.begin(), t1.end());
  c2.setFromTriplets(t2.begin(), t2.end());
  return {c1, c2};
}

// Grid edge list (latitude, longitude, and diagonal neighbors, with the
// antipodal pole rule).  The centered first-derivative stencils have a zero
// center weight and therefore annihilate node-alternating (sawtooth) fields
// exactly; chord-difference rows over this edge set restore injectivity on
// those modes while still vanishing exactly on sampled Killing fields, since
// <K(x_p - x_q), x_p - x_q> = 0 for any skew-adjoint K.
inline SpMat vstack(const SpMat& a, const SpMat& b) {
  std::vector<Trip> t;
  t.reserve(a.nonZeros() + b.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it)
      t.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < b.outerSize(); ++k)
    for (SpMat::InnerIterator it(b, k); it; ++it)
      t.emplace_back(a.rows() + it.row(), it.col(), it.value());
  SpMat m(a.rows() + b.rows(), a.cols());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline std::vector<std::pair<int, int>> grid_edges(const SphereGrid& g) {
  std::vector<std::pair<int, int>> e;
  e.reserve(3 * g.nodes());
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      int p = g.index(i, j);
      int di[3] = {0, 1, 1}, dj[3] = {1, 0, 1};
      for (int k = 0; k < 3; ++k) {
        int ii, jj;
        bool flip;
        g.wrap(i + di[k], j + dj[k], ii, jj, flip);
        int q = g.index(ii, jj);
        if (q != p) e.emplace_back(p, q);
      }
    }
  return e;
}

// Scale every row to unit norm.  A positive diagonal row scaling changes
// neither the kernel nor the exact annihilation of sampled Killing fields,
// but it equilibrates the widely different derivative scales of the rows
// (lat-lon grids oversample the azimuth near the poles), which keeps the
// normal-equation spectrum within double-precision reach and makes the
// relative kernel threshold tau * s_max meaningful.
inline void equilibrate_rows(SpMat& a) {
  Eigen::VectorXd norm2 = Eigen::VectorXd::Zero(a.rows());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it)
      norm2[it.row()] += it.value() * it.value();
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      double n2 = norm2[it.row()];
      if (n2 > 0) it.valueRef() /= std::sqrt(n2);
    }
}

}  // namespace detail

// Assemble the rigidity operator for a surface given by its positions (the
// tangents and the normal are recomputed with the grid stencils so that the
// algebraic Killing cancellation is exact).
inline RigidityOperator build_rigidity_operator(const AmbientField& x,
                                                RigidityKind kind) {
  using detail::SpMat;
  const SphereGrid& g = x.grid();
  int n = g.nodes();
  RigidityOperator op;
  op.kind = kind;
  op.n = n;

  if (kind == RigidityKind::euclid) {
    // Klein image, unknowns are plain R^3 node vectors
    Ambient3Field p(g);
    for (int m = 0; m < n; ++m) {
      Vec4 xx = x.raw()[m];
      p.raw()[m] = spatial(xx) / xx[0];
    }
    Ambient3Field pt = d_theta(p), pp = d_phi(p);
    std::vector<Vec3> vt(n), vp(n);
    for (int m = 0; m < n; ++m) {
      vt[m] = pt.raw()[m];
      vp[m] = pp.raw()[m];
    }
    auto [c1, c2] = detail::contraction<3>(g, vt, vp);
    SpMat Dt = detail::stencil_matrix<3>(g, true);
    SpMat Dp = detail::stencil_matrix<3>(g, false);
    SpMat stencil_part = c1 * Dt + c2 * Dp;
    auto edges = detail::grid_edges(g);
    std::vector<detail::Trip> te;
    for (int e = 0; e < (int)edges.size(); ++e) {
      auto [pq, qq] = edges[e];
      Vec3 d = p.raw()[pq] - p.raw()[qq];
      double l2 = std::max(d.squaredNorm(), 1e-14);
      Vec3 w = d / l2;
      for (int c = 0; c < 3; ++c) {
        te.emplace_back(e, 3 * pq + c, w[c]);
        te.emplace_back(e, 3 * qq + c, -w[c]);
      }
    }
    SpMat E((int)edges.size(), 3 * n);
    E.setFromTriplets(te.begin(), te.end());
    op.A = detail::vstack(stencil_part, E);
    detail::equilibrate_rows(op.A);
    return op;
  }

  // Hyperbolic kinds are both first-order metric-variation operators: the
  // third form of a surface is the induced metric of its dual, so deltaIII
  // is assembled as deltaI of the dual positions.  This keeps the operator
  // first order (no chained normal linearization), which is what preserves a
  // clean spectral gap above the six-dimensional Killing kernel.
  AmbientField xt = d_theta(x), xp = d_phi(x);
  op.pos.resize(n);
  if (kind == RigidityKind::deltaI) {
    for (int m = 0; m < n; ++m) op.pos[m] = x.raw()[m];
    op.eps3 = 1.0;
  } else {
    for (int m = 0; m < n; ++m) {
      Vec4 xx = x.raw()[m];
      // discrete normal: orthogonal to x and both discrete tangents by the
      // triple-cross construction, oriented toward the interior side
      Vec4 N = cross4(xx, xt.raw()[m], xp.raw()[m]);
      N /= std::sqrt(mink(N, N));
      Vec4 radial = lift(spatial(xx).norm(), xx[0] * spatial(xx).normalized());
      if (mink(N, radial) > 0) N = -N;
      op.pos[m] = -N;  // dual position
    }
    op.eps3 = -1.0;
  }

  AmbientField pf(g);
  for (int m = 0; m < n; ++m) pf.raw()[m] = op.pos[m];
  AmbientField pt = d_theta(pf), pp = d_phi(pf);
  std::vector<Vec4> vt(n), vp(n);
  op.frame.resize(n);
  for (int m = 0; m < n; ++m) {
    vt[m] = pt.raw()[m];
    vp[m] = pp.raw()[m];
    Vec4 yy = op.pos[m];
    // frame for the exact tangent space at the working position; the first
    // two legs are spacelike, the third is spacelike on H^3 and timelike on
    // the de Sitter dual
    Vec4 e1 = project_tangent(yy, vt[m]);
    e1 /= std::sqrt(mink(e1, e1));
    Vec4 e2 = project_tangent(yy, vp[m]);
    e2 -= mink(e2, e1) * e1;
    e2 /= std::sqrt(mink(e2, e2));
    Vec4 e3 = cross4(yy, e1, e2);
    e3 /= std::sqrt(std::abs(mink(e3, e3)));
    op.frame[m].col(0) = e1;
    op.frame[m].col(1) = e2;
    op.frame[m].col(2) = e3;
  }

  SpMat Su = detail::block_diag<4, 3>(op.frame);
  SpMat Dt = detail::stencil_matrix<4>(g, true);
  SpMat Dp = detail::stencil_matrix<4>(g, false);
  auto [c1, c2] = detail::contraction<4>(g, vt, vp);

  // chord rows against the same coefficient frames
  Mat4 Jm = mink_metric();
  auto edges = detail::grid_edges(g);
  std::vector<detail::Trip> te;
  for (int e = 0; e < (int)edges.size(); ++e) {
    auto [pq, qq] = edges[e];
    Vec4 d = op.pos[pq] - op.pos[qq];
    double l2 = std::max(std::abs(mink(d, d)), 1e-14);
    Vec4 w = Jm * d / l2;
    for (int c = 0; c < 4; ++c) {
      te.emplace_back(e, 4 * pq + c, w[c]);
      te.emplace_back(e, 4 * qq + c, -w[c]);
    }
  }
  SpMat E((int)edges.size(), 4 * n);
  E.setFromTriplets(te.begin(), te.end());

  op.A = detail::vstack(SpMat(SpMat(c1 * Dt + c2 * Dp) * Su), SpMat(E * Su));
  detail::equilibrate_rows(op.A);
  return op;
}

// Sampled Killing coefficient basis (3n x 6) for the operator's unknowns.
inline Eigen::MatrixXd killing_coefficient_basis(const AmbientField& x,
                                                 const RigidityOperator& op) {
  const SphereGrid& g = x.grid();
  int n = g.nodes();
  Eigen::MatrixXd K(3 * n, 6);
  if (op.kind == RigidityKind::euclid) {
    for (int m = 0; m < n; ++m) {
      Vec4 xx = x.raw()[m];
      Vec3 p = spatial(xx) / xx[0];
      for (int k = 0; k < 3; ++k) {
        Vec3 a = Vec3::Unit(k);
        K.block<3, 1>(3 * m, k) = a;
        K.block<3, 1>(3 * m, 3 + k) = a.cross(p);
      }
    }
    return K;
  }
  // Killing samples at the operator's working positions (the dual surface
  // for deltaIII), expanded in its frames.  With a Minkowski-orthonormal
  // frame of signs (1, 1, eps3) the expansion of a tangent vector u is
  // u = sum_k eps_k <u, e_k> e_k, so the third coefficient carries eps3.
  Mat4 J = mink_metric();
  const auto& basis = so31_basis();
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < 6; ++k) {
      Vec4 u = basis[k] * op.pos[m];
      Vec3 c = op.frame[m].transpose() * J * u;
      c[2] *= op.eps3;
      K.block<3, 1>(3 * m, k) = c;
    }
  return K;
}

struct RigiditySpectrum {
  std::vector<double> svals;  // smallest 12, ascending
  double smax = 0.0;
  Eigen::MatrixXd kernel;  // 3n x 6 orthonormal
  double killing_angle = 0.0;  // largest principal angle to the sampled basis
};

inline RigiditySpectrum rigidity_spectrum(const RigidityOperator& op,
                                          const Eigen::MatrixXd& killing,
                                          unsigned seed = 7u) {
  using detail::SpMat;
  int N = op.A.cols();
  SpMat M = SpMat(op.A.transpose()) * op.A;

  // largest singular value by power iteration on A^T A
  Eigen::VectorXd v = Eigen::VectorXd::Ones(N).normalized();
  double lmax = 0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = M * v;
    lmax = w.norm();
    v = w / lmax;
  }
  double smax = std::sqrt(lmax);

  // shift-inverted subspace iteration for the smallest eigenpairs
  double sigma = std::max(lmax * 1e-14, 1e-300);
  SpMat Ms = M;
  for (int c = 0; c < N; ++c) Ms.coeffRef(c, c) += sigma;
  Eigen::SimplicialLDLT<SpMat> ldlt(Ms);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("rigidity_spectrum: factorization failed");

  int k = 12;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(N, k);
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < N; ++r) X(r, c) = nd(rng);
  // shift-invert with sigma ~ eps * lmax: the kernel/s7 ratio is so extreme
  // that a handful of iterations converges; 20 leaves a wide margin
  for (int it = 0; it < 20; ++it) {
    X = ldlt.solve(X);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    X = qr.householderQ() * Eigen::MatrixXd::Identity(N, k);
  }
  Eigen::MatrixXd T = X.transpose() * (M * X).eval();
  T = 0.5 * (T + T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  Eigen::VectorXd ev = es.eigenvalues();  // ascending
  Eigen::MatrixXd Z = X * es.eigenvectors();

  RigiditySpectrum out;
  out.smax = smax;
  for (int c = 0; c < 12; ++c)
    out.svals.push_back(std::sqrt(std::max(ev[c], 0.0)));
  out.kernel = Z.leftCols(6);
  {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(out.kernel);
    out.kernel = qr.householderQ() * Eigen::MatrixXd::Identity(N, 6);
  }
  Eigen::MatrixXd Kb = killing;
  {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Kb);
    Kb = qr.householderQ() * Eigen::MatrixXd::Identity(N, 6);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Kb.transpose() * out.kernel);
  double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  out.killing_angle = std::acos(c);
  return out;
}

// One-call interface: spectrum of the chosen variation operator on the
// surface with the given positions.
inline RigiditySpectrum rigidity_kernel(const AmbientField& x,
                                        RigidityKind kind,
                                        unsigned seed = 7u) {
  RigidityOperator op = build_rigidity_operator(x, kind);
  Eigen::MatrixXd K = killing_coefficient_basis(x, op);
  return rigidity_spectrum(op, K, seed);
}

}  // namespace hsurf
