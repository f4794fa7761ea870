#pragma once

// Numerical realization of a prescribed metric on S^2 as a convex radial
// surface in H^3 (prescribed induced metric, or prescribed third fundamental
// form through the dual surface), plus gauge alignment over the isometry
// group SO(3,1).

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "hsurf/dual.hpp"
#include "hsurf/grid.hpp"
#include "hsurf/interp.hpp"
#include "hsurf/surface.hpp"

namespace hsurf {

struct RealizeOptions {
  double tol = 1e-10;      // relative sup-norm of the form residual
  int max_iters = 80;
  double mu_factor = 1e-8;  // Tikhonov damping relative to max diag(J^T J)
  int threads = 1;
  bool validate_jacobian = true;
  bool check_admissibility = true;
};

struct RealizeReport {
  std::vector<double> residual_history;  // relative sup-norms, decreasing
  bool converged = false;
  bool stalled = false;
  int iterations = 0;
  double final_residual = 0.0;
  double convexity_margin = 0.0;    // min principal curvature at the end
  double jacobian_fd_error = 0.0;   // relative FD validation error
};

// The solver's own measure of the dual induced metric (third fundamental
// form up to grid truncation): stencil tangents of the dual positions -N.
inline FormField dual_metric_fd(const FrameField& f) {
  AmbientField y(f.grid);
  for (size_t n = 0; n < y.raw().size(); ++n) y.raw()[n] = -f.N.raw()[n];
  AmbientField yt = d_theta(y), yp = d_phi(y);
  FormField out = make_form(f.grid);
  const SphereGrid& g = f.grid;
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Vec4 a = yt.at(i, j), b = yp.at(i, j);
      out.at(i, j) = Eigen::Vector3d(mink(a, a), mink(a, b), mink(b, b));
    }
  return out;
}

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

inline SpMat stencil_matrix_scalar(const SphereGrid& g, bool theta_dir) {
  std::vector<Trip> t;
  double h = theta_dir ? g.dtheta() : g.dphi();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      for (int k = -2; k <= 2; ++k) {
        double w = kStencil5[k + 2] / h;
        if (kStencil5[k + 2] == 0.0) continue;
        int ii, jj;
        bool flip;
        if (theta_dir)
          g.wrap(i + k, j, ii, jj, flip);
        else
          g.wrap(i, j + k, ii, jj, flip);
        t.emplace_back(g.index(i, j), g.index(ii, jj), w);
      }
  SpMat m(g.nodes(), g.nodes());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline double rel_sup(const FormField& I, const FormField& h) {
  double num = 0, den = 0;
  for (size_t n = 0; n < I.raw().size(); ++n) {
    num = std::max(num, (I.raw()[n] - h.raw()[n]).cwiseAbs().maxCoeff());
    den = std::max(den, h.raw()[n].cwiseAbs().maxCoeff());
  }
  return num / std::max(den, 1e-300);
}

inline Eigen::VectorXd stack_residual(const FormField& I, const FormField& h) {
  int n = (int)I.raw().size();
  Eigen::VectorXd r(3 * n);
  for (int m = 0; m < n; ++m) r.segment<3>(3 * m) = I.raw()[m] - h.raw()[m];
  return r;
}

// per-node geometric data reused by both Jacobians
struct NodeGeom {
  Vec4 x, rhat, xt, xp, wt, wp, N;
};

inline std::vector<NodeGeom> node_geometry(const RadialSurface& s,
                                           const FrameField& f) {
  const SphereGrid& g = s.grid;
  ScalarField rth = d_theta(s.rho), rph = d_phi(s.rho);
  std::vector<NodeGeom> out(g.nodes());
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      NodeGeom& nd = out[g.index(i, j)];
      double r = s.rho.at(i, j)[0];
      Vec3 d = g.dir(i, j);
      nd.x = f.x.at(i, j);
      nd.rhat = lift(std::sinh(r), std::cosh(r) * d);
      nd.xt = f.xth.at(i, j);
      nd.xp = f.xph.at(i, j);
      // d(x_a)/d(rho) at fixed stencil values: rho_a * x + cosh(rho) * d_a
      nd.wt = rth.at(i, j)[0] * nd.x +
              std::cosh(r) * lift(0.0, g.dir_theta(i, j));
      nd.wp = rph.at(i, j)[0] * nd.x +
              std::cosh(r) * lift(0.0, g.dir_phi(i, j));
      nd.N = f.N.at(i, j);
    }
  return out;
}

// Jacobian of the induced-metric residual with respect to nodal radii.
inline SpMat metric_jacobian(const RadialSurface& s, const FrameField& f) {
  const SphereGrid& g = s.grid;
  int n = g.nodes();
  std::vector<NodeGeom> nd = node_geometry(s, f);
  std::vector<Trip> t0, tt, tp;
  for (int m = 0; m < n; ++m) {
    const NodeGeom& q = nd[m];
    t0.emplace_back(3 * m + 0, m, 2.0 * mink(q.xt, q.wt));
    t0.emplace_back(3 * m + 1, m, mink(q.wt, q.xp) + mink(q.xt, q.wp));
    t0.emplace_back(3 * m + 2, m, 2.0 * mink(q.xp, q.wp));
    tt.emplace_back(3 * m + 0, m, 2.0 * mink(q.xt, q.rhat));
    tt.emplace_back(3 * m + 1, m, mink(q.rhat, q.xp));
    tp.emplace_back(3 * m + 1, m, mink(q.xt, q.rhat));
    tp.emplace_back(3 * m + 2, m, 2.0 * mink(q.xp, q.rhat));
  }
  auto build = [&](std::vector<Trip>& tr) {
    SpMat mmat(3 * n, n);
    mmat.setFromTriplets(tr.begin(), tr.end());
    return mmat;
  };
  SpMat Dt = stencil_matrix_scalar(g, true), Dp = stencil_matrix_scalar(g, false);
  return build(t0) + build(tt) * Dt + build(tp) * Dp;
}

// Jacobian of the dual-metric residual: chain through the linearized normal.
inline SpMat third_jacobian(const RadialSurface& s, const FrameField& f) {
  const SphereGrid& g = s.grid;
  int n = g.nodes();
  std::vector<NodeGeom> nd = node_geometry(s, f);
  Mat4 J = mink_metric();

  // deltaN = n0 * drho + n1 * Dth(drho) + n2 * Dph(drho), per node
  std::vector<Trip> b0, b1, b2;
  for (int m = 0; m < n; ++m) {
    const NodeGeom& q = nd[m];
    Mat4 E;
    E.col(0) = q.x;
    E.col(1) = q.xt;
    E.col(2) = q.xp;
    E.col(3) = q.N;
    Mat4 W = E * (E.transpose() * J * E).inverse();
    Vec4 v0(-mink(q.N, q.rhat), -mink(q.N, q.wt), -mink(q.N, q.wp), 0.0);
    Vec4 v1(0.0, -mink(q.N, q.rhat), 0.0, 0.0);
    Vec4 v2(0.0, 0.0, -mink(q.N, q.rhat), 0.0);
    Vec4 n0 = W * v0, n1 = W * v1, n2 = W * v2;
    for (int c = 0; c < 4; ++c) {
      if (n0[c] != 0) b0.emplace_back(4 * m + c, m, n0[c]);
      if (n1[c] != 0) b1.emplace_back(4 * m + c, m, n1[c]);
      if (n2[c] != 0) b2.emplace_back(4 * m + c, m, n2[c]);
    }
  }
  auto build4 = [&](std::vector<Trip>& tr) {
    SpMat mmat(4 * n, n);
    mmat.setFromTriplets(tr.begin(), tr.end());
    return mmat;
  };
  SpMat Dts = stencil_matrix_scalar(g, true), Dps = stencil_matrix_scalar(g, false);
  SpMat Mn = build4(b0) + build4(b1) * Dts + build4(b2) * Dps;

  // rows: delta(I*)_ab = <D_a dy, y_b> + <y_a, D_b dy>, dy = -deltaN, y = -N
  AmbientField y(g);
  for (int m = 0; m < n; ++m) y.raw()[m] = -f.N.raw()[m];
  AmbientField yt = d_theta(y), yp = d_phi(y);
  std::vector<Trip> c1, c2;
  for (int m = 0; m < n; ++m) {
    Vec4 jt = J * yt.raw()[m], jp = J * yp.raw()[m];
    for (int c = 0; c < 4; ++c) {
      c1.emplace_back(3 * m + 0, 4 * m + c, 2.0 * jt[c]);
      c1.emplace_back(3 * m + 1, 4 * m + c, jp[c]);
      c2.emplace_back(3 * m + 1, 4 * m + c, jt[c]);
      c2.emplace_back(3 * m + 2, 4 * m + c, 2.0 * jp[c]);
    }
  }
  SpMat C1(3 * n, 4 * n), C2(3 * n, 4 * n);
  C1.setFromTriplets(c1.begin(), c1.end());
  C2.setFromTriplets(c2.begin(), c2.end());

  // ambient 4-component stencil matrices
  std::vector<Trip> dt4, dp4;
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      for (int k = -2; k <= 2; ++k) {
        double wth = kStencil5[k + 2] / g.dtheta();
        double wph = kStencil5[k + 2] / g.dphi();
        if (kStencil5[k + 2] == 0.0) continue;
        int ii, jj;
        bool flip;
        g.wrap(i + k, j, ii, jj, flip);
        for (int c = 0; c < 4; ++c)
          dt4.emplace_back(4 * g.index(i, j) + c, 4 * g.index(ii, jj) + c, wth);
        g.wrap(i, j + k, ii, jj, flip);
        for (int c = 0; c < 4; ++c)
          dp4.emplace_back(4 * g.index(i, j) + c, 4 * g.index(ii, jj) + c, wph);
      }
  SpMat Dt4(4 * n, 4 * n), Dp4(4 * n, 4 * n);
  Dt4.setFromTriplets(dt4.begin(), dt4.end());
  Dp4.setFromTriplets(dp4.begin(), dp4.end());

  // dy = -deltaN, and the row data above already uses the y tangents, so the
  // two sign flips combine into a single negation of the deformation map.
  SpMat MnNeg = -Mn;
  return SpMat(C1 * SpMat(Dt4 * MnNeg)) + SpMat(C2 * SpMat(Dp4 * MnNeg));
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline RadialSurface round_initialization(const FormField& h) {
  double area = surface_area(h);
  double rho0 = std::asinh(std::sqrt(area / (4.0 * M_PI)));
  return RadialSurface(h.grid(), rho0);
}

namespace detail {

template <class ResidualFn, class JacobianFn>
inline std::pair<RadialSurface, RealizeReport> gauss_newton(
    const FormField& h, RadialSurface s, const RealizeOptions& o,
    ResidualFn&& residual_of, JacobianFn&& jacobian_of) {
  const SphereGrid& g = s.grid;
  int n = g.nodes();
  RealizeReport rep;

  auto eval = [&](const RadialSurface& surf) {
    FrameField f = embed_stencil(surf, o.threads);
    return std::make_pair(std::move(f), residual_of(surf));
  };

  auto [frame, R] = eval(s);
  double rel = rel_sup(R, h);
  rep.residual_history.push_back(rel);

  if (o.validate_jacobian) {
    SpMat J = jacobian_of(s, frame);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> ndist;
    ScalarField dir(g);
    for (auto& v : dir.raw()) v[0] = ndist(rng);
    double eps = 1e-6;
    RadialSurface sp = s, sm = s;
    for (int m = 0; m < n; ++m) {
      sp.rho.raw()[m][0] += eps * dir.raw()[m][0];
      sm.rho.raw()[m][0] -= eps * dir.raw()[m][0];
    }
    Eigen::VectorXd fd =
        (stack_residual(residual_of(sp), h) -
         stack_residual(residual_of(sm), h)) /
        (2 * eps);
    Eigen::VectorXd dv(n);
    for (int m = 0; m < n; ++m) dv[m] = dir.raw()[m][0];
    Eigen::VectorXd an = J * dv;
    rep.jacobian_fd_error = (an - fd).norm() / std::max(fd.norm(), 1e-300);
  }

  double mu = o.mu_factor;
  for (int it = 0; it < o.max_iters && rel > o.tol; ++it) {
    SpMat J = jacobian_of(s, frame);
    Eigen::VectorXd r = stack_residual(R, h);
    SpMat JtJ0 = SpMat(J.transpose()) * J;
    Eigen::VectorXd Jtr = J.transpose() * r;
    double dmax = 0;
    for (int c = 0; c < n; ++c) dmax = std::max(dmax, JtJ0.coeff(c, c));

    double r2 = r.squaredNorm();
    bool accepted = false;
    // Levenberg-Marquardt escalation: if the damped step cannot be made to
    // decrease the residual by backtracking, raise the damping and retry
    // before declaring a stall
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt, mu *= 100.0) {
      SpMat JtJ = JtJ0;
      for (int c = 0; c < n; ++c) JtJ.coeffRef(c, c) += mu * dmax;
      Eigen::SimplicialLDLT<SpMat> ldlt(JtJ);
      Eigen::VectorXd step = ldlt.solve(-Jtr);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) continue;

      double alpha = 1.0;
      for (int bt = 0; bt < 20; ++bt, alpha *= 0.5) {
        RadialSurface cand = s;
        bool pos = true;
        for (int m = 0; m < n; ++m) {
          cand.rho.raw()[m][0] += alpha * step[m];
          if (cand.rho.raw()[m][0] <= 0) pos = false;
        }
        if (!pos) continue;
        FrameField cf;
        FormField cR = make_form(g);
        try {
          cf = embed_stencil(cand, o.threads);
          cR = residual_of(cand);
        } catch (const std::exception&) {
          continue;
        }
        double c2 = stack_residual(cR, h).squaredNorm();
        if (c2 > (1.0 - 1e-4 * alpha) * r2) continue;
        // convexity guard near the solution; farther out the iterate may
        // legitimately pass through mildly nonconvex shapes
        if (rel < 1e-2) {
          SurfaceForms sf = fundamental_forms(cf, o.threads);
          if (!sf.nonconvex.empty()) continue;
        }
        s = std::move(cand);
        frame = std::move(cf);
        R = std::move(cR);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.stalled = true;
      break;
    }
    mu = std::max(o.mu_factor, mu * 1e-4);  // relax after a successful step
    rel = rel_sup(R, h);
    rep.residual_history.push_back(rel);
    rep.iterations = it + 1;
  }
  rep.final_residual = rel;
  rep.converged = rel <= o.tol;
  {
    SurfaceForms sf = fundamental_forms(frame, o.threads);
    double k0 = std::numeric_limits<double>::infinity();
    for (size_t m = 0; m < sf.B.raw().size(); ++m) {
      auto v = sf.B.raw()[m];
      Mat2 b;
      b << v[0], v[1], v[2], v[3];
      k0 = std::min(k0, principal_curvatures(b).first);
    }
    rep.convexity_margin = k0;
  }
  return {std::move(s), std::move(rep)};
}

}  // namespace detail

inline std::pair<RadialSurface, RealizeReport> realize_metric(
    const FormField& h, const RadialSurface& init,
    const RealizeOptions& o = {}) {
  if (o.check_admissibility) {
    Admissibility a = admissibility_I(h);
    if (!a.admissible)
      throw std::domain_error("realize_metric: inadmissible target (" +
                              a.reason + ")");
  }
  auto residual = [&](const RadialSurface& s) {
    return fundamental_forms(embed_stencil(s)).I;
  };
  auto jac = [&](const RadialSurface& s, const FrameField& f) {
    return detail::metric_jacobian(s, f);
  };
  return detail::gauss_newton(h, init, o, residual, jac);
}

inline std::pair<RadialSurface, RealizeReport> realize_third_form(
    const FormField& h, const RadialSurface& init,
    const RealizeOptions& o = {}) {
  if (o.check_admissibility) {
    Admissibility a = admissibility_III(h);
    if (!a.admissible)
      throw std::domain_error("realize_third_form: inadmissible target (" +
                              a.reason + ")");
  }
  auto residual = [&](const RadialSurface& s) {
    return dual_metric_fd(embed_stencil(s));
  };
  auto jac = [&](const RadialSurface& s, const FrameField& f) {
    return detail::third_jacobian(s, f);
  };
  return detail::gauss_newton(h, init, o, residual, jac);
}

// ---------------------------------------------------------------------------
// Gauge alignment: find g in SO(3,1) minimizing the radial mismatch of g.s
// against the reference, then re-sample g.s on the grid.

struct GaugeAlignResult {
  RadialSurface aligned;
  Mat4 isometry = Mat4::Identity();
  double position_error = 0.0;  // max nodewise hyperbolic distance
  double cost = 0.0;
};

inline GaugeAlignResult gauge_align(const RadialSurface& s,
                                    const RadialSurface& ref,
                                    int threads = 1) {
  const SphereGrid& g = s.grid;
  int n = g.nodes();
  FrameField fs = embed(s);

  TrigInterp rho_ref = TrigInterp::from_field(ref.rho);

  auto group = [&](const Eigen::Matrix<double, 6, 1>& t) {
    Mat4 m = Mat4::Zero();
    const auto& basis = so31_basis();
    for (int k = 0; k < 6; ++k) m += t[k] * basis[k];
    return Mat4(m.exp());
  };

  auto residuals = [&](const Eigen::Matrix<double, 6, 1>& t,
                       Eigen::VectorXd& r) {
    Mat4 G = group(t);
    for (int m = 0; m < n; ++m) {
      Vec4 y = G * fs.x.raw()[m];
      Vec3 sp = spatial(y);
      double rho = std::asinh(sp.norm());
      Vec3 d = sp.normalized();
      double th = std::acos(std::clamp(d[2], -1.0, 1.0));
      double ph = std::atan2(d[1], d[0]);
      r[m] = rho - rho_ref(th, ph);
    }
  };

  Eigen::Matrix<double, 6, 1> t = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::VectorXd r(n), rp(n), rm(n);
  residuals(t, r);
  double cost = r.squaredNorm();
  double lambda = 1e-4;
  for (int it = 0; it < 60; ++it) {
    Eigen::MatrixXd J(n, 6);
    double eps = 1e-6;
    for (int k = 0; k < 6; ++k) {
      auto tp = t, tm = t;
      tp[k] += eps;
      tm[k] -= eps;
      residuals(tp, rp);
      residuals(tm, rm);
      J.col(k) = (rp - rm) / (2 * eps);
    }
    Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
    Eigen::Matrix<double, 6, 1> grad = J.transpose() * r;
    bool improved = false;
    for (int bt = 0; bt < 20; ++bt) {
      Eigen::Matrix<double, 6, 6> Hl = H;
      Hl.diagonal().array() += lambda * H.diagonal().maxCoeff() + 1e-300;
      Eigen::Matrix<double, 6, 1> step = Hl.ldlt().solve(-grad);
      auto tc = t;
      tc += step;
      residuals(tc, rp);
      double c2 = rp.squaredNorm();
      if (c2 < cost) {
        t = tc;
        r = rp;
        cost = c2;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        break;
      }
      lambda *= 10;
    }
    if (!improved || cost < 1e-26 * n) break;
  }

  GaugeAlignResult out;
  out.isometry = group(t);
  AmbientField y(g);
  for (int m = 0; m < n; ++m) y.raw()[m] = out.isometry * fs.x.raw()[m];
  RadialResampleResult rr = resample_radial(y, threads);
  if (!rr.ok)
    throw std::runtime_error("gauge_align: aligned surface not a radial graph");
  out.aligned = rr.surface;
  out.cost = cost;
  double pe = 0;
  for (int m = 0; m < n; ++m) {
    double a = out.aligned.rho.raw()[m][0], b = ref.rho.raw()[m][0];
    pe = std::max(pe, std::abs(a - b));
  }
  out.position_error = pe;
  return out;
}

}  // namespace hsurf
