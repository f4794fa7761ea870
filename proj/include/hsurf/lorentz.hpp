#pragma once

// Minkowski R^4_1 linear algebra, the quadric models of hyperbolic 3-space
// and the de Sitter space, geodesics, and the Killing-field calculus.
//
// Signature convention: <u,v> = -u0 v0 + u1 v1 + u2 v2 + u3 v3.
// H3  = { x : <x,x> = -1, x0 > 0 },  S31 = { x : <x,x> = +1 }.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace hsurf {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kQuadricTol = 1e-12;

inline double mink(const Vec4& u, const Vec4& v) {
  return -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3];
}

inline Mat4 mink_metric() {
  Mat4 j = Mat4::Identity();
  j(0, 0) = -1.0;
  return j;
}

// Projection of an ambient vector onto the tangent space of the quadric at x
// (works for both quadrics: <x,x> = s with s = +-1).
inline Vec4 project_tangent(const Vec4& x, const Vec4& v) {
  return v - (mink(v, x) / mink(x, x)) * x;
}

struct HPoint {
  Vec4 v;

  explicit HPoint(const Vec4& p) : v(p) {
    if (std::abs(mink(p, p) + 1.0) > 1e-9 || p[0] <= 0.0)
      throw std::invalid_argument("HPoint: not on the H3 quadric");
  }
  // Renormalizes onto the quadric; use after compositions to kill drift.
  static HPoint project(const Vec4& p) {
    double s = std::sqrt(-mink(p, p));
    return HPoint(p / s);
  }
  static HPoint center() { return HPoint(Vec4(1, 0, 0, 0)); }
};

struct DSPoint {
  Vec4 v;

  explicit DSPoint(const Vec4& p) : v(p) {
    if (std::abs(mink(p, p) - 1.0) > 1e-9)
      throw std::invalid_argument("DSPoint: not on the S31 quadric");
  }
  static DSPoint project(const Vec4& p) {
    double s = std::sqrt(mink(p, p));
    return DSPoint(p / s);
  }
};

// Tangent vector of a quadric model, stored with its base point.
struct TangentVec {
  Vec4 base;
  Vec4 dir;
};

inline double h_dist(const HPoint& x, const HPoint& y) {
  double c = -mink(x.v, y.v);
  if (c < 1.0 - 1e-9)
    throw std::domain_error("h_dist: off-quadric input (cosh d < 1)");
  return std::acosh(std::max(c, 1.0));
}

// geodesic through x with unit tangent v: cosh(t) x + sinh(t) v.
inline HPoint geodesic(const HPoint& x, const Vec4& v, double t) {
  if (std::abs(mink(v, v) - 1.0) > 1e-9)
    throw std::invalid_argument("geodesic: direction is not unit spacelike");
  return HPoint::project(std::cosh(t) * x.v + std::sinh(t) * v);
}

// Triple cross product in R^4_1: cross4(a,b,c) is Minkowski-orthogonal to
// a, b, c.  The sign is fixed so that at x0 = (1,0,0,0) the tangent-space
// wedge  u ^ v := cross4(x, u, v)  is the right-handed Euclidean cross
// product of the spatial parts.
inline Vec4 cross4(const Vec4& a, const Vec4& b, const Vec4& c) {
  Vec4 r;
  auto det3 = [](const Vec3& u, const Vec3& v, const Vec3& w) {
    return u.dot(v.cross(w));
  };
  // minor expansion of eps_{mu,rho,sigma,tau} a^rho b^sigma c^tau
  Vec3 a1(a[1], a[2], a[3]), b1(b[1], b[2], b[3]), c1(c[1], c[2], c[3]);
  Vec3 a0x(a[0], a[2], a[3]), b0x(b[0], b[2], b[3]), c0x(c[0], c[2], c[3]);
  Vec3 a0y(a[0], a[1], a[3]), b0y(b[0], b[1], b[3]), c0y(c[0], c[1], c[3]);
  Vec3 a0z(a[0], a[1], a[2]), b0z(b[0], b[1], b[2]), c0z(c[0], c[1], c[2]);
  double e0 = det3(a1, b1, c1);
  double e1 = -det3(a0x, b0x, c0x);
  double e2 = det3(a0y, b0y, c0y);
  double e3 = -det3(a0z, b0z, c0z);
  // lower index with eta^{mu nu} and flip the overall sign (orientation fix)
  r[0] = e0;  // -eta^{00} e0 = e0
  r[1] = -e1;
  r[2] = -e2;
  r[3] = -e3;
  return r;
}

// Wedge of two tangent vectors at x (3-dimensional tangent space of either
// quadric); right-handed with the orientation induced from the spatial slice.
inline Vec4 tangent_cross(const Vec4& x, const Vec4& u, const Vec4& v) {
  return cross4(x, u, v);
}

// ---------------------------------------------------------------------------
// Killing fields: elements of so(3,1) as 4x4 matrices, K^T J + J K = 0.

struct KillingElement {
  Mat4 mat;

  KillingElement() : mat(Mat4::Zero()) {}
  explicit KillingElement(const Mat4& m) : mat(m) {
    Mat4 j = mink_metric();
    if (((m.transpose() * j + j * m).cwiseAbs().maxCoeff()) > 1e-9)
      throw std::invalid_argument("KillingElement: matrix not in so(3,1)");
  }
  KillingElement operator+(const KillingElement& o) const {
    return KillingElement(mat + o.mat);
  }
  KillingElement operator*(double s) const { return KillingElement(mat * s); }
};

inline Vec4 killing_eval(const KillingElement& k, const Vec4& x) {
  return k.mat * x;
}

// Basis of so(3,1): three boosts (translations at the center) followed by
// three rotations about the spatial axes.
inline const std::array<Mat4, 6>& so31_basis() {
  static const std::array<Mat4, 6> basis = [] {
    std::array<Mat4, 6> b;
    for (auto& m : b) m.setZero();
    for (int i = 0; i < 3; ++i) {
      b[i](0, i + 1) = 1.0;
      b[i](i + 1, 0) = 1.0;
    }
    // rotation about axis i: spatial skew
    int ax[3][2] = {{2, 3}, {3, 1}, {1, 2}};
    for (int i = 0; i < 3; ++i) {
      b[3 + i](ax[i][1], ax[i][0]) = 1.0;
      b[3 + i](ax[i][0], ax[i][1]) = -1.0;
    }
    return b;
  }();
  return basis;
}

// Pure translation at x with translation vector tau (tau tangent at x):
// K u = <tau,u> x - <x,u> tau.
inline Mat4 pure_translation(const Vec4& x, const Vec4& tau) {
  Mat4 j = mink_metric();
  return x * (j * tau).transpose() - tau * (j * x).transpose();
}

// Pure rotation at x with rotation vector sigma: K u = cross4(x, sigma, u).
inline Mat4 pure_rotation(const Vec4& x, const Vec4& sigma) {
  Mat4 k;
  for (int c = 0; c < 4; ++c) {
    Vec4 e = Vec4::Zero();
    e[c] = 1.0;
    k.col(c) = cross4(x, sigma, e);
  }
  return k;
}

// Decomposition of a Killing field at x into (translation, rotation) vectors:
// tau_x = K x, and sigma_x is the rotation vector of the skew part of the
// covariant differential of the field at x.
inline std::pair<Vec4, Vec4> killing_decompose(const KillingElement& k,
                                               const HPoint& x) {
  Vec4 tau = k.mat * x.v;
  // covariant differential at x: w -> P(K w) on the tangent space
  // build an orthonormal tangent frame e1,e2,e3 at x
  Mat4 frame;  // columns: x, e1, e2, e3
  frame.col(0) = x.v;
  int seed = 1;
  int c = 1;
  for (int s = 0; s < 4 && c < 4; ++s) {
    Vec4 e = Vec4::Zero();
    e[(seed + s) % 4] = 1.0;
    Vec4 t = project_tangent(x.v, e);
    for (int p = 1; p < c; ++p) t -= mink(t, frame.col(p)) * frame.col(p);
    double n2 = mink(t, t);
    if (n2 > 1e-12) frame.col(c++) = t / std::sqrt(n2);
  }
  // ensure right-handed frame for tangent_cross: e1 ^ e2 = e3
  Vec4 e3 = tangent_cross(x.v, frame.col(1), frame.col(2));
  if (mink(e3, frame.col(3)) < 0) frame.col(3) = -frame.col(3);

  Mat3 d;  // nabla of the field in the frame
  for (int a = 0; a < 3; ++a) {
    Vec4 da = project_tangent(x.v, k.mat * frame.col(a + 1));
    for (int b = 0; b < 3; ++b) d(b, a) = mink(da, frame.col(b + 1));
  }
  Mat3 s = 0.5 * (d - d.transpose());
  // s(w) = sigma ^ w in the right-handed frame
  Vec3 sig3(s(2, 1), s(0, 2), s(1, 0));
  Vec4 sigma = sig3[0] * frame.col(1) + sig3[1] * frame.col(2) +
               sig3[2] * frame.col(3);
  return {tau, sigma};
}

inline KillingElement killing_compose(const Vec4& tau, const Vec4& sigma,
                                      const HPoint& x) {
  return KillingElement(pure_translation(x.v, tau) + pure_rotation(x.v, sigma));
}

}  // namespace hsurf
