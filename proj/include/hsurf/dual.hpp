#pragma once

// Dual surface in de Sitter space of a convex surface in H^3, the search
// for shortest closed geodesics of a metric on S^2, and the admissibility
// verdicts for prescribed first / third fundamental forms.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hsurf/grid.hpp"
#include "hsurf/interp.hpp"
#include "hsurf/surface.hpp"

namespace hsurf {

// ---------------------------------------------------------------------------
// Duality.  Positions of S* are the outward unit normals -N (N interior), so
// the dual lies in the positive hemisphere for surfaces star-shaped around
// the center; the interior normal of S* is -x.  With these signs the induced
// metric of S* is III(S), the second forms agree, and B* = B^{-1}.

struct DualSurface {
  FrameField frame;
  SurfaceForms forms;
};

inline DualSurface dualize(const FrameField& f, int threads = 1) {
  const SphereGrid& g = f.grid;
  DualSurface d;
  d.frame.grid = g;
  d.frame.x = AmbientField(g);
  d.frame.N = AmbientField(g);
  for (int n = 0; n < g.nodes(); ++n) d.frame.x.raw()[n] = -f.N.raw()[n];
  d.frame.xth = d_theta(d.frame.x);
  d.frame.xph = d_phi(d.frame.x);
  // recompute the normal from the dual's own tangents so the whole dual
  // pipeline depends on the positions alone; it converges to -x.  The normal
  // is timelike off a de Sitter dual and spacelike off a double dual in H^3.
  for (int n = 0; n < g.nodes(); ++n) {
    Vec4 y = d.frame.x.raw()[n];
    Vec4 x1 = f.x.raw()[n];
    Vec4 nn = tangent_cross(y, d.frame.xth.raw()[n], d.frame.xph.raw()[n]);
    double n2 = std::abs(mink(nn, nn));
    if (n2 < 1e-20)
      throw std::runtime_error("dualize: degenerate dual tangents");
    nn /= std::sqrt(n2);
    // orient toward -x: the pairing with x must have the opposite sign of
    // <x, x> (= -1 in H^3, +1 in de Sitter space)
    if (mink(nn, x1) * mink(x1, x1) > 0) nn = -nn;
    d.frame.N.raw()[n] = nn;
  }
  d.forms = fundamental_forms(d.frame, threads);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      Mat2 m = form_mat(d.forms.I, i, j);
      if (m(0, 0) <= 0 || m.determinant() <= 0)
        throw std::runtime_error(
            "dualize: non-spacelike dual node (convexity failure) at (" +
            std::to_string(i) + "," + std::to_string(j) + ")");
    }
  return d;
}

// ---------------------------------------------------------------------------
// Fast chart-free metric evaluation: dense tables of the regularized
// components on the doubled torus, bicubic Catmull-Rom interpolation.

class FastSphereMetric {
 public:
  explicit FastSphereMetric(const FormField& gmet, int refine = 4) {
    MetricInterp mi(gmet);
    const SphereGrid& g = gmet.grid();
    nt_ = 2 * g.n_theta * refine;
    np_ = g.n_phi * refine;
    // tabulate the regularized components through the spectral interpolant
    TrigInterp E, F, G;
    {
      std::vector<double> e(g.nodes()), f(g.nodes()), gg(g.nodes());
      for (int i = 0; i < g.n_theta; ++i) {
        double st = std::sin(g.theta(i));
        for (int j = 0; j < g.n_phi; ++j) {
          auto v = gmet.at(i, j);
          e[g.index(i, j)] = v[0];
          f[g.index(i, j)] = v[1] / st;
          gg[g.index(i, j)] = v[2] / (st * st);
        }
      }
      E = TrigInterp(g, e, 1.0);
      F = TrigInterp(g, f, 1.0);
      G = TrigInterp(g, gg, 1.0);
    }
    tabE_.resize(nt_ * np_);
    tabF_.resize(nt_ * np_);
    tabG_.resize(nt_ * np_);
    for (int i = 0; i < nt_; ++i) {
      double th = 2.0 * M_PI * i / nt_;
      for (int j = 0; j < np_; ++j) {
        double ph = 2.0 * M_PI * j / np_;
        tabE_[i * np_ + j] = E(th, ph);
        tabF_[i * np_ + j] = F(th, ph);
        tabG_[i * np_ + j] = G(th, ph);
      }
    }
  }

  double quad(const Vec3& p, const Vec3& v) const {
    double theta = std::acos(std::clamp(p[2], -1.0, 1.0));
    double phi = std::atan2(p[1], p[0]);
    if (phi < 0) phi += 2.0 * M_PI;
    double st = std::sin(theta);
    Vec3 eth, eph;
    if (st < 1e-12) {
      eth = Vec3(1, 0, 0);
      eph = Vec3(0, p[2] > 0 ? 1.0 : -1.0, 0);
    } else {
      eth = Vec3(std::cos(theta) * std::cos(phi),
                 std::cos(theta) * std::sin(phi), -st);
      eph = Vec3(-std::sin(phi), std::cos(phi), 0);
    }
    double a = v.dot(eth), b = v.dot(eph);
    double e = lookup(tabE_, theta, phi), f = lookup(tabF_, theta, phi),
           g = lookup(tabG_, theta, phi);
    return e * a * a + 2.0 * f * a * b + g * b * b;
  }

 private:
  static double cr(double fm1, double f0, double f1, double f2, double t) {
    // Catmull-Rom
    return f0 + 0.5 * t *
                    (f1 - fm1 +
                     t * (2 * fm1 - 5 * f0 + 4 * f1 - f2 +
                          t * (3 * (f0 - f1) + f2 - fm1)));
  }
  double lookup(const std::vector<double>& tab, double th, double ph) const {
    double x = th * nt_ / (2.0 * M_PI), y = ph * np_ / (2.0 * M_PI);
    int i0 = (int)std::floor(x), j0 = (int)std::floor(y);
    double tx = x - i0, ty = y - j0;
    double col[4];
    for (int di = -1; di <= 2; ++di) {
      int i = ((i0 + di) % nt_ + nt_) % nt_;
      double row[4];
      for (int dj = -1; dj <= 2; ++dj) {
        int j = ((j0 + dj) % np_ + np_) % np_;
        row[dj + 1] = tab[i * np_ + j];
      }
      col[di + 1] = cr(row[0], row[1], row[2], row[3], ty);
    }
    return cr(col[0], col[1], col[2], col[3], tx);
  }

  int nt_ = 0, np_ = 0;
  std::vector<double> tabE_, tabF_, tabG_;
};

// ---------------------------------------------------------------------------
// Closed-geodesic search by discrete curve shortening.

struct GeodesicOptions {
  int points = 64;
  int max_iters = 10000;
  double tol = 1e-12;  // relative energy-decrease stop
  int random_starts = 4;
  unsigned seed = 20240817;
};

struct GeodesicResult {
  double length = 0.0;
  std::vector<Vec3> curve;
  double residual = 0.0;  // last relative energy decrease
  int start_index = -1;
  bool converged = false;
};

namespace detail {

// log-map segment measure: q the geodesic midpoint, u the tangent at q with
// |u| equal to the spherical angle between the endpoints.
inline double segment_quad(const FastSphereMetric& m, const Vec3& a,
                           const Vec3& b) {
  Vec3 q = (a + b).normalized();
  double alpha = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
  Vec3 d = b - a;
  d -= d.dot(q) * q;
  double dn = d.norm();
  if (dn < 1e-15 || alpha < 1e-15) return 0.0;
  Vec3 u = (alpha / dn) * d;
  return m.quad(q, u);
}

inline double curve_energy(const FastSphereMetric& m,
                           const std::vector<Vec3>& p) {
  int n = (int)p.size();
  double e = 0;
  for (int k = 0; k < n; ++k) e += segment_quad(m, p[k], p[(k + 1) % n]);
  return 0.5 * n * e;
}

inline double curve_length(const FastSphereMetric& m,
                           const std::vector<Vec3>& p) {
  int n = (int)p.size();
  double L = 0;
  for (int k = 0; k < n; ++k)
    L += std::sqrt(std::max(segment_quad(m, p[k], p[(k + 1) % n]), 0.0));
  return L;
}

// resample the closed polyline to equal spherical arc spacing
inline void redistribute(std::vector<Vec3>& p) {
  int n = (int)p.size();
  std::vector<double> cum(n + 1, 0.0);
  for (int k = 0; k < n; ++k)
    cum[k + 1] =
        cum[k] + std::acos(std::clamp(p[k].dot(p[(k + 1) % n]), -1.0, 1.0));
  double total = cum[n];
  std::vector<Vec3> q(n);
  int seg = 0;
  for (int k = 0; k < n; ++k) {
    double s = total * k / n;
    while (seg + 1 < n + 1 && cum[seg + 1] < s) ++seg;
    double t = (cum[seg + 1] > cum[seg])
                   ? (s - cum[seg]) / (cum[seg + 1] - cum[seg])
                   : 0.0;
    Vec3 a = p[seg % n], b = p[(seg + 1) % n];
    q[k] = ((1 - t) * a + t * b).normalized();
  }
  p = std::move(q);
}

// State of one curve of a sweep-out family under Barzilai-Borwein descent
// with backtracking on the discrete energy.
struct BirkhoffCurve {
  std::vector<Vec3> p, p_prev, grad, grad_prev;
  double E = 0.0;
  double step = 1e-3;
  double length = 0.0;
  int its = 0;
  bool frozen = false;
};

inline void energy_grad(const FastSphereMetric& m, const std::vector<Vec3>& p,
                        std::vector<Vec3>& grad) {
  int n = (int)p.size();
  grad.resize(n);
  auto local_energy = [&](int k, const Vec3& pk) {
    return 0.5 * n *
           (segment_quad(m, p[(k + n - 1) % n], pk) +
            segment_quad(m, pk, p[(k + 1) % n]));
  };
  for (int k = 0; k < n; ++k) {
    Vec3 pk = p[k];
    // probe scaled to the local segment size so the relative FD noise stays
    // flat while a loop shrinks
    double eps = std::max(
        1e-4 * (p[(k + 1) % n] - p[(k + n - 1) % n]).norm(), 1e-10);
    Vec3 c = pk.cross(Vec3(0.3, 0.7, 0.64));
    if (c.norm() < 1e-6) c = pk.cross(Vec3(1, 0, 0));
    Vec3 t1 = c.normalized();
    Vec3 t2 = pk.cross(t1);
    double g1 = (local_energy(k, (pk + eps * t1).normalized()) -
                 local_energy(k, (pk - eps * t1).normalized())) /
                (2 * eps);
    double g2 = (local_energy(k, (pk + eps * t2).normalized()) -
                 local_energy(k, (pk - eps * t2).normalized())) /
                (2 * eps);
    grad[k] = g1 * t1 + g2 * t2;
  }
}

// One descent step; returns the relative energy decrease.
inline double birkhoff_step(const FastSphereMetric& m, BirkhoffCurve& c) {
  int n = (int)c.p.size();
  energy_grad(m, c.p, c.grad);
  if (c.its > 0) {
    double num = 0, den = 0;
    for (int k = 0; k < n; ++k) {
      Vec3 dp = c.p[k] - c.p_prev[k], dg = c.grad[k] - c.grad_prev[k];
      num += dp.dot(dp);
      den += dp.dot(dg);
    }
    if (den > 1e-300) c.step = std::clamp(num / den, 1e-8, 1.0);
  }
  c.p_prev = c.p;
  c.grad_prev = c.grad;
  double E_new = c.E;
  std::vector<Vec3> cand(n);
  double step = c.step;
  for (int bt = 0; bt < 30; ++bt) {
    for (int k = 0; k < n; ++k)
      cand[k] = (c.p[k] - step * c.grad[k]).normalized();
    E_new = curve_energy(m, cand);
    if (E_new <= c.E) break;
    step *= 0.5;
  }
  ++c.its;
  if (E_new > c.E) return 0.0;
  double rel = (c.E - E_new) / std::max(c.E, 1e-300);
  c.p = std::move(cand);
  c.E = E_new;
  if (c.its % 50 == 0) {
    redistribute(c.p);
    c.E = curve_energy(m, c.p);
  }
  c.length = curve_length(m, c.p);
  return rel;
}

// Signed spherical area enclosed by a closed polyline: 2*pi minus the total
// geodesic turning (Gauss-Bonnet on the unit sphere), in [0, 4*pi].  Used to
// classify which side a collapsing loop shrinks to.
inline double loop_area(const std::vector<Vec3>& p) {
  int n = (int)p.size();
  double turn = 0.0;
  for (int k = 0; k < n; ++k) {
    Vec3 a = p[(k + n - 1) % n], b = p[k], c = p[(k + 1) % n];
    Vec3 tin = -(a - a.dot(b) * b), tout = c - b.dot(c) * b;
    if (tin.norm() < 1e-15 || tout.norm() < 1e-15) continue;
    tin.normalize();
    tout.normalize();
    turn += std::atan2(tin.cross(tout).dot(b), tin.dot(tout));
  }
  double area = 2.0 * M_PI - turn;
  while (area < 0) area += 4.0 * M_PI;
  while (area > 4.0 * M_PI) area -= 4.0 * M_PI;
  return area;
}

enum class DescentFate { kCollapsed, kCritical, kStalled };

struct DescentResult {
  DescentFate fate;
  double length = 0.0;
  double area = 0.0;
  std::vector<Vec3> curve;
  double last_rel = 0.0;
  // closest approach to a critical point along the trajectory: the length at
  // the iterate with the smallest normalized gradient
  double crit_len = 0.0;
  double crit_gn = std::numeric_limits<double>::infinity();
  std::vector<Vec3> crit_curve;
};

// Run curve shortening until the loop collapses, lingers at a critical point
// (relative energy decrease below tol for a sustained window), or the
// iteration cap is reached.
inline DescentResult descend(const FastSphereMetric& m, std::vector<Vec3> p,
                             double collapse_len, int max_its) {
  BirkhoffCurve c;
  c.p = std::move(p);
  c.E = curve_energy(m, c.p);
  c.length = curve_length(m, c.p);
  DescentResult r;
  // criticality = the length holds still over a sustained window; a collapse
  // always keeps shrinking at a visible rate until the size cutoff fires
  const int window = 25;
  double wmin = c.length, wmax = c.length;
  int held = 0;
  for (int it = 0; it < max_its; ++it) {
    r.last_rel = birkhoff_step(m, c);
    if (c.length > 1.2 * collapse_len) {
      double g2 = 0;
      for (const auto& gk : c.grad) g2 += gk.squaredNorm();
      double gn = std::sqrt(g2) / std::max(c.E, 1e-300);
      if (gn < r.crit_gn) {
        r.crit_gn = gn;
        r.crit_len = c.length;
        r.crit_curve = c.p;
      }
    }
    if (c.length < collapse_len) {
      r.fate = DescentFate::kCollapsed;
      r.area = loop_area(c.p);
      r.length = c.length;
      r.curve = std::move(c.p);
      return r;
    }
    wmin = std::min(wmin, c.length);
    wmax = std::max(wmax, c.length);
    if (++held >= window) {
      if (wmax - wmin < 3e-7 * wmax) {
        r.fate = DescentFate::kCritical;
        r.length = c.length;
        r.curve = std::move(c.p);
        return r;
      }
      wmin = wmax = c.length;
      held = 0;
    }
  }
  r.fate = DescentFate::kStalled;
  r.area = loop_area(c.p);
  r.length = c.length;
  r.curve = std::move(c.p);
  return r;
}

}  // namespace detail

// Shortest closed geodesic via sweep-out bisection.  Closed geodesics on S^2
// are saddle points of the length functional, so plain curve shortening
// collapses every loop; but along a sweep of latitude circles the collapse
// side flips, and bisecting on the sweep parameter drives the starting circle
// onto the stable manifold of a geodesic, where the descent lingers and the
// plateau detector reads off its length.  Minimum over several sweep axes.
inline GeodesicResult shortest_closed_geodesic(
    const FormField& metric, const GeodesicOptions& o = {}) {
  FastSphereMetric fm(metric);
  std::vector<Vec3> axes = {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> nd;
  for (int s = 0; s < o.random_starts; ++s) {
    Vec3 a(nd(rng), nd(rng), nd(rng));
    axes.push_back(a.normalized());
  }

  GeodesicResult best;
  best.length = std::numeric_limits<double>::infinity();
  for (int ai = 0; ai < (int)axes.size(); ++ai) {
    Vec3 a = axes[ai];
    Vec3 e = a.cross(std::abs(a[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0))
                 .normalized();
    Vec3 f = a.cross(e);
    auto circle = [&](double s) {
      double alpha = M_PI * s;
      std::vector<Vec3> p(o.points);
      for (int k = 0; k < o.points; ++k) {
        double t = 2.0 * M_PI * k / o.points;
        p[k] = std::cos(alpha) * a +
               std::sin(alpha) * (std::cos(t) * e + std::sin(t) * f);
      }
      return p;
    };
    double collapse_len = 0.25 * detail::curve_length(fm, circle(0.5));
    int cap = std::min(o.max_iters, 500);

    double lo = 0.05, hi = 0.95;
    bool found = false;
    double est_len = 0.0, est_gn = std::numeric_limits<double>::infinity();
    std::vector<Vec3> est_curve;
    double est_rel = 0.0;
    for (int b = 0; b < 45 && !found; ++b) {
      double s = 0.5 * (lo + hi);
      detail::DescentResult last = detail::descend(fm, circle(s), collapse_len, cap);
      if (last.fate == detail::DescentFate::kCritical) {
        est_len = last.length;
        est_curve = std::move(last.curve);
        est_rel = last.last_rel;
        found = true;
        break;
      }
      // the iterate of closest critical approach pins the saddle length;
      // bisection levels whose estimates agree certify convergence
      if (last.crit_len > 0) {
        bool agree = est_len > 0 &&
                     std::abs(last.crit_len - est_len) < 1e-3 * est_len;
        if (last.crit_gn < est_gn) {
          est_len = last.crit_len;
          est_gn = last.crit_gn;
          est_curve = std::move(last.crit_curve);
          est_rel = last.last_rel;
        }
        if (agree) {
          found = true;
          break;
        }
      }
      if (last.area < 2.0 * M_PI)
        lo = s;
      else
        hi = s;
    }
    if (est_len > 0 && est_len < best.length) {
      best.length = est_len;
      best.curve = std::move(est_curve);
      best.residual = est_rel;
      best.start_index = ai;
      best.converged = found;
    }
  }
  if (!std::isfinite(best.length)) {
    // no axis produced a critical loop; report a failing verdict
    best.length = 0.0;
    best.converged = false;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Admissibility of prescribed metrics.

struct Admissibility {
  bool admissible = false;
  double kmin = 0, kmax = 0;
  double curvature_margin = 0;  // K+1 min (form I) or 1-K min (form III)
  double min_geodesic = 0;      // form III only
  double geodesic_margin = 0;   // min_geodesic - 2*pi
  std::string reason;
};

inline Admissibility admissibility_I(const FormField& h) {
  Admissibility a;
  ScalarField K = gauss_curvature(h);
  a.kmin = a.kmax = K.raw()[0][0];
  for (const auto& v : K.raw()) {
    a.kmin = std::min(a.kmin, v[0]);
    a.kmax = std::max(a.kmax, v[0]);
  }
  a.curvature_margin = a.kmin + 1.0;
  a.admissible = a.curvature_margin > 0;
  if (!a.admissible) a.reason = "curvature K <= -1 somewhere";
  return a;
}

inline Admissibility admissibility_III(const FormField& h,
                                       const GeodesicOptions& o = {}) {
  Admissibility a;
  ScalarField K = gauss_curvature(h);
  a.kmin = a.kmax = K.raw()[0][0];
  for (const auto& v : K.raw()) {
    a.kmin = std::min(a.kmin, v[0]);
    a.kmax = std::max(a.kmax, v[0]);
  }
  a.curvature_margin = 1.0 - a.kmax;
  if (a.curvature_margin <= 0) {
    a.admissible = false;
    a.reason = "curvature K >= 1 somewhere";
    return a;
  }
  GeodesicResult gr = shortest_closed_geodesic(h, o);
  a.min_geodesic = gr.length;
  a.geodesic_margin = gr.length - 2.0 * M_PI;
  a.admissible = a.geodesic_margin > 0;
  if (!a.admissible) a.reason = "closed geodesic of length <= 2*pi found";
  return a;
}

}  // namespace hsurf
