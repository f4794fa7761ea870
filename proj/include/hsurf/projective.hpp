#pragma once

// Klein projective models of H^3 (open unit ball) and of the de Sitter
// hemisphere (exterior of the closed ball), the point-plane duality, and the
// Pogorelov maps on tangent vectors and on Killing fields.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "hsurf/lorentz.hpp"

namespace hsurf {

// Radial/lateral splits degenerate at the model center; chart-level
// operations exclude a small disk around it.
inline constexpr double kCenterEps = 1e-6;

struct KleinPoint {
  Vec3 p;
  bool hyperbolic;  // |p| < 1 (image of H3) vs |p| > 1 (de Sitter exterior)

  explicit KleinPoint(const Vec3& q) : p(q), hyperbolic(q.norm() < 1.0) {
    if (std::abs(q.norm() - 1.0) < 1e-14)
      throw std::invalid_argument("KleinPoint: on the ideal boundary");
  }
};

inline Vec3 spatial(const Vec4& x) { return Vec3(x[1], x[2], x[3]); }
inline Vec4 lift(double t, const Vec3& s) { return Vec4(t, s[0], s[1], s[2]); }

inline KleinPoint phi_H(const HPoint& x) {
  return KleinPoint(spatial(x.v) / x.v[0]);
}

inline HPoint phi_H_inv(const KleinPoint& k) {
  double r2 = k.p.squaredNorm();
  if (r2 >= 1.0)
    throw std::invalid_argument("phi_H_inv: point outside the unit ball");
  double x0 = 1.0 / std::sqrt(1.0 - r2);
  return HPoint(lift(x0, x0 * k.p));
}

inline KleinPoint phi_S(const DSPoint& x) {
  if (x.v[0] <= 0.0)
    throw std::invalid_argument("phi_S: point outside the open hemisphere");
  return KleinPoint(spatial(x.v) / x.v[0]);
}

inline DSPoint phi_S_inv(const KleinPoint& k) {
  double r2 = k.p.squaredNorm();
  if (r2 <= 1.0)
    throw std::invalid_argument("phi_S_inv: point inside the closed ball");
  double x0 = 1.0 / std::sqrt(r2 - 1.0);
  return DSPoint(lift(x0, x0 * k.p));
}

// Differential of the central projection x -> spatial(x)/x0 at x, applied to
// an ambient vector v (tangency at x is not required; the formula is the
// derivative of the projection of the straight line x + t v).
inline Vec3 dphi(const Vec4& x, const Vec4& v) {
  return spatial(v) / x[0] - spatial(x) * (v[0] / (x[0] * x[0]));
}

inline Vec3 dphi_H(const HPoint& x, const Vec4& v) { return dphi(x.v, v); }
inline Vec3 dphi_S(const DSPoint& x, const Vec4& v) { return dphi(x.v, v); }

// ---------------------------------------------------------------------------
// Point-plane duality.

// Totally geodesic plane in H3, stored as its dual de Sitter point:
// plane = { x in H3 : <x, dual> = 0 }, oriented by the sign of the pairing.
struct HPlane {
  DSPoint dual;
  explicit HPlane(const DSPoint& d) : dual(d) {}
};

// Spacelike totally geodesic plane in S31, stored as its dual point of H3.
struct DSPlane {
  HPoint dual;
  explicit DSPlane(const HPoint& d) : dual(d) {}
};

inline DSPoint dual_of_plane(const HPlane& pl) { return pl.dual; }
inline DSPlane dual_of_point(const HPoint& x) { return DSPlane(x); }
inline HPoint dual_of_plane(const DSPlane& pl) { return pl.dual; }
inline HPlane dual_of_point(const DSPoint& x) { return HPlane(x); }

// Plane through a point with a chosen unit normal (tangent at x): the dual
// point is the normal itself, with positive pairing against it.
inline HPlane plane_through(const HPoint& x, const Vec4& unit_normal) {
  if (std::abs(mink(unit_normal, x.v)) > 1e-9 ||
      std::abs(mink(unit_normal, unit_normal) - 1.0) > 1e-9)
    throw std::invalid_argument("plane_through: normal not unit tangent");
  return HPlane(DSPoint(unit_normal));
}

// ---------------------------------------------------------------------------
// Radial geometry around the model center.

// Unit outward radial tangent at x (direction away from the center), valid
// for both quadrics; undefined within kCenterEps of the center axis.
inline Vec4 radial_dir_H(const HPoint& x) {
  Vec3 s = spatial(x.v);
  double sn = s.norm();
  if (sn < kCenterEps)
    throw std::domain_error("radial_dir_H: too close to the center");
  Vec3 d = s / sn;  // sn = sinh(rho)
  return lift(sn, x.v[0] * d);
}

inline Vec4 radial_dir_S(const DSPoint& x) {
  // curve t -> (sinh t, cosh t d) has |p| = coth t decreasing; the tangent
  // (cosh t, sinh t d) is timelike, unit for <.,.> up to sign.
  Vec3 s = spatial(x.v);
  double sn = s.norm();  // cosh(t) >= 1, never degenerate on the hemisphere
  Vec3 d = s / sn;
  return lift(sn, x.v[0] * d);
}

// ---------------------------------------------------------------------------
// Pogorelov maps on tangent vectors: lateral part by the differential of the
// projection, radial part keeping its direction (along the Klein ray) and
// its metric norm.

struct PogorelovImage {
  KleinPoint base;
  Vec3 vec;
};

namespace detail {
inline PogorelovImage pogorelov(const Vec4& x, const Vec4& v, const Vec4& rdir,
                                bool radial_timelike, const KleinPoint& base) {
  double sgn = radial_timelike ? -1.0 : 1.0;  // <rdir,rdir> = -1 resp. +1
  double a = sgn * mink(v, rdir);             // component of v along rdir
  Vec4 vrad = a * rdir;
  Vec4 vlat = v - vrad;
  Vec3 out = dphi(x, vlat);
  if (std::abs(a) > 0.0) {
    Vec3 edir = dphi(x, rdir);
    double en = edir.norm();
    if (en < 1e-14)
      throw std::domain_error("pogorelov: degenerate radial image");
    // |vrad| = |a|.  On H^3 the Klein image of rdir points outward and the
    // radial part keeps its parameterization sign; on S^3_1 increasing the
    // radial parameter moves the Klein point inward (|p| = coth t), and the
    // orientation that glues with the interior map across the ideal sphere
    // flips the sign once more.
    out += (edir / en) * (a * sgn);
  }
  return {base, out};
}
}  // namespace detail

inline PogorelovImage pogorelov_phi_H(const HPoint& x, const Vec4& v) {
  KleinPoint base = phi_H(x);
  if (spatial(x.v).norm() < kCenterEps) return {base, dphi(x.v, v)};
  return detail::pogorelov(x.v, v, radial_dir_H(x), false, base);
}

inline PogorelovImage pogorelov_phi_S(const DSPoint& x, const Vec4& v) {
  KleinPoint base = phi_S(x);
  return detail::pogorelov(x.v, v, radial_dir_S(x), true, base);
}

// ---------------------------------------------------------------------------
// Euclidean Killing fields a + b ^ p and the Pogorelov map on so(3,1).

struct EuclideanKilling {
  Vec3 a;  // translation part (value at the origin)
  Vec3 b;  // rotation vector

  Vec3 value(const Vec3& p) const { return a + b.cross(p); }
  // (translation, rotation) decomposition at p; the rotation vector of a
  // Euclidean Killing field is position-independent.
  std::pair<Vec3, Vec3> decompose_at(const Vec3& p) const {
    return {value(p), b};
  }
};

// Flat-connection derivative of a Euclidean Killing section (tau, sigma)
// along w: D_w(tau, sigma) = (d_w tau + w ^ sigma, d_w sigma), where d_w is
// the coordinate derivative supplied by the caller.
inline std::pair<Vec3, Vec3> euclid_killing_transport(const Vec3& dtau,
                                                      const Vec3& dsigma,
                                                      const Vec3& w,
                                                      const Vec3& sigma) {
  return {dtau + w.cross(sigma), dsigma};
}

// Pogorelov map on Killing fields: the image of the field of k under the
// tangent-vector map, which is a Euclidean Killing field.  Closed form in
// terms of the (tau, sigma) decomposition of k at x; at the center the split
// degenerates, so the evaluation point is nudged along x1 (the result is
// independent of the evaluation point).
inline EuclideanKilling psi_H(const KillingElement& k, const HPoint& x_in) {
  HPoint x = x_in;
  if (spatial(x.v).norm() < kCenterEps)
    x = HPoint::project(x.v + Vec4(0, 0.1, 0, 0));

  auto [tau, sigma] = killing_decompose(k, x);
  Vec4 rdir = radial_dir_H(x);
  Vec3 xb = phi_H(x).p;
  double r = xb.norm();
  Vec3 rbar = xb / r;  // Euclidean unit radial
  double cr = 1.0 / std::sqrt(1.0 - r * r);  // cosh(rho)

  auto split = [&](const Vec4& t, double& rad, Vec4& lat) {
    rad = mink(t, rdir);
    lat = t - rad * rdir;
  };
  double tr, sr;
  Vec4 tlat, slat;
  split(tau, tr, tlat);
  split(sigma, sr, slat);

  auto lateral_image = [&](const Vec4& lat) -> Vec3 {
    double n = std::sqrt(std::max(mink(lat, lat), 0.0));
    if (n < 1e-15) return Vec3::Zero();
    Vec3 img = dphi(x.v, lat);
    return (img / img.norm()) * n;  // unit-lateral image scaled by |lat|
  };
  Vec3 vt = lateral_image(tlat);  // |tau_lat| * vbar
  Vec3 vs = lateral_image(slat);

  // value at xb and rotation vector, per the closed forms
  Vec3 tau_bar = tr * rbar + vt / cr;
  Vec3 sigma_bar = sr * rbar + cr * vs - (r * cr) * rbar.cross(vt);
  return {tau_bar - sigma_bar.cross(xb), sigma_bar};
}

}  // namespace hsurf
