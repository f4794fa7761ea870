#pragma once

// Trigonometric interpolation of grid fields.  A field on the half-offset
// latitude grid extends to a smooth doubly periodic function on the torus
// (theta in [0, 2pi)) via the antipodal rule F(2pi - theta, phi) =
// s * F(theta, phi + pi) with s the pole parity of the component; the
// extension lives on a uniform (2 n_theta) x n_phi grid, so a plain double
// Fourier series interpolates with spectral accuracy.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "hsurf/grid.hpp"
#include "hsurf/surface.hpp"

namespace hsurf {

class TrigInterp {
 public:
  TrigInterp() = default;

  // data: nodal values on the grid; parity: +1 or -1 pole parity.
  TrigInterp(const SphereGrid& g, const std::vector<double>& data,
             double parity)
      : nt_(2 * g.n_theta), np_(g.n_phi) {
    std::vector<double> ext(nt_ * np_);
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j) {
        ext[i * np_ + j] = data[g.index(i, j)];
        int jj = (j + np_ / 2) % np_;
        ext[(nt_ - 1 - i) * np_ + j] = parity * data[g.index(i, jj)];
      }
    // separable DFT: phi first, then the doubled theta
    std::vector<std::complex<double>> row(nt_ * np_);
    for (int i = 0; i < nt_; ++i)
      for (int l = 0; l < np_; ++l) {
        std::complex<double> s = 0;
        for (int j = 0; j < np_; ++j)
          s += ext[i * np_ + j] *
               std::polar(1.0, -2.0 * M_PI * l * j / np_);
        row[i * np_ + l] = s / double(np_);
      }
    coef_.assign(nt_ * np_, 0.0);
    // the theta samples sit at (i + 1/2) * (2pi / nt): include the offset,
    // and use the signed frequencies of eval() -- on offset samples a
    // frequency shift by nt flips the sign of the exponential
    for (int k = 0; k < nt_; ++k) {
      double fk = freq(k, nt_);
      for (int l = 0; l < np_; ++l) {
        std::complex<double> s = 0;
        for (int i = 0; i < nt_; ++i)
          s += row[i * np_ + l] *
               std::polar(1.0, -fk * 2.0 * M_PI * (i + 0.5) / nt_);
        coef_[k * np_ + l] = s / double(nt_);
      }
    }
  }

  static TrigInterp from_field(const ScalarField& f) {
    std::vector<double> d(f.raw().size());
    for (size_t n = 0; n < d.size(); ++n) d[n] = f.raw()[n][0];
    return TrigInterp(f.grid(), d, f.parity()[0]);
  }

  // value and first partials at (theta, phi); theta may be any real (the
  // series is 2pi-periodic in both arguments).
  void eval(double theta, double phi, double* v, double* vth = nullptr,
            double* vph = nullptr) const {
    // signed frequencies; Nyquist rows treated as cosine-only
    std::vector<std::complex<double>> eth(nt_), eph(np_);
    for (int k = 0; k < nt_; ++k)
      eth[k] = std::polar(1.0, freq(k, nt_) * theta);
    for (int l = 0; l < np_; ++l)
      eph[l] = std::polar(1.0, freq(l, np_) * phi);
    std::complex<double> s = 0, sth = 0, sph = 0;
    for (int k = 0; k < nt_; ++k) {
      double fk = freq(k, nt_);
      for (int l = 0; l < np_; ++l) {
        std::complex<double> term = coef_[k * np_ + l] * eth[k] * eph[l];
        s += term;
        if (vth) sth += std::complex<double>(0, fk) * term;
        if (vph) sph += std::complex<double>(0, freq(l, np_)) * term;
      }
    }
    *v = s.real();
    if (vth) *vth = sth.real();
    if (vph) *vph = sph.real();
  }

  double operator()(double theta, double phi) const {
    double v;
    eval(theta, phi, &v);
    return v;
  }

 private:
  static double freq(int k, int n) { return k <= n / 2 ? k : k - n; }
  int nt_ = 0, np_ = 0;
  std::vector<std::complex<double>> coef_;
};

// Metric on S^2 evaluated chart-free: for a point p on S^2 and a 3-vector v
// tangent at p, g(v,v) uses the regularized components E, F/sin(theta),
// G/sin^2(theta), which are smooth across the poles; the chart factors
// cancel against the frame normalization, so the evaluation stays regular.
class MetricInterp {
 public:
  MetricInterp() = default;
  explicit MetricInterp(const FormField& gmet) {
    const SphereGrid& g = gmet.grid();
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
    // F/sin and G/sin^2 are pole-even once the chart parity is divided out
    E_ = TrigInterp(g, e, 1.0);
    F_ = TrigInterp(g, f, 1.0);
    G_ = TrigInterp(g, gg, 1.0);
  }

  // quadratic form on a tangent 3-vector v at unit point p
  double quad(const Vec3& p, const Vec3& v) const {
    double theta = std::acos(std::clamp(p[2], -1.0, 1.0));
    double phi = std::atan2(p[1], p[0]);
    double st = std::sin(theta);
    Vec3 eth, eph;
    if (st < 1e-12) {  // exact pole: any orthonormal frame; components even
      eth = Vec3(1, 0, 0);
      eph = Vec3(0, p[2] > 0 ? 1.0 : -1.0, 0);
    } else {
      eth = Vec3(std::cos(theta) * std::cos(phi),
                 std::cos(theta) * std::sin(phi), -st);
      eph = Vec3(-std::sin(phi), std::cos(phi), 0);
    }
    double a = v.dot(eth), b = v.dot(eph);
    return E_(theta, phi) * a * a + 2.0 * F_(theta, phi) * a * b +
           G_(theta, phi) * b * b;
  }

  double bilin(const Vec3& p, const Vec3& u, const Vec3& v) const {
    return 0.25 * (quad(p, u + v) - quad(p, u - v));
  }

 private:
  TrigInterp E_, F_, G_;
};

// ---------------------------------------------------------------------------
// Radial resampling: given ambient positions of a surface that is a radial
// graph (one intersection per ray from the center), recover the radius at
// the grid directions by spectral interpolation of the position components
// and a per-node 2D Newton solve on the chart parameters.

struct RadialResampleResult {
  RadialSurface surface;
  double max_newton_residual = 0.0;
  bool ok = true;
};

inline RadialResampleResult resample_radial(const AmbientField& y,
                                            int threads = 1) {
  const SphereGrid& g = y.grid();
  std::array<TrigInterp, 4> comp;
  {
    std::vector<double> d(g.nodes());
    for (int c = 0; c < 4; ++c) {
      for (int n = 0; n < g.nodes(); ++n) d[n] = y.raw()[n][c];
      comp[c] = TrigInterp(g, d, y.parity()[c]);
    }
  }
  RadialResampleResult out;
  out.surface = RadialSurface(g);
  std::vector<double> resid(g.nodes(), 0.0);
  std::vector<char> fail(g.nodes(), 0);

  parallel_for(g.nodes(), threads, [&](int n) {
    int i = n / g.n_phi, j = n % g.n_phi;
    Vec3 target = g.dir(i, j);
    // orthonormal complement of the target direction
    Vec3 c0 = target.cross(Vec3(0.36, 0.48, 0.8));
    if (c0.norm() < 1e-6) c0 = target.cross(Vec3(1, 0, 0));
    Vec3 ea = c0.normalized(), eb = target.cross(ea);

    double th = g.theta(i), ph = g.phi(j);
    Vec4 Y = Vec4::Zero();
    double r2 = 1.0;
    for (int it = 0; it < 40; ++it) {
      Vec4 Yt, Yp;
      for (int c = 0; c < 4; ++c)
        comp[c].eval(th, ph, &Y[c], &Yt[c], &Yp[c]);
      Vec3 s = spatial(Y), st = spatial(Yt), sp = spatial(Yp);
      double sn = s.norm();
      Vec3 u = s / sn;
      // residuals: components of the unit direction orthogonal to target
      double fa = ea.dot(u), fb = eb.dot(u);
      r2 = std::hypot(fa, fb);
      if (r2 < 1e-13) break;
      auto dunit = [&](const Vec3& ds) {
        return (ds - u * u.dot(ds)) / sn;
      };
      Vec3 ut = dunit(st), up = dunit(sp);
      Mat2 J;
      J << ea.dot(ut), ea.dot(up), eb.dot(ut), eb.dot(up);
      Eigen::Vector2d step = J.inverse() * Eigen::Vector2d(fa, fb);
      if (!step.allFinite()) break;
      // safeguard against wild steps far from the basin
      double cap = 0.5;
      double sl = step.norm();
      if (sl > cap) step *= cap / sl;
      th -= step[0];
      ph -= step[1];
    }
    resid[n] = r2;
    if (r2 > 1e-10 || spatial(Y).dot(target) <= 0) fail[n] = 1;
    out.surface.rho.at(i, j)[0] = std::asinh(spatial(Y).norm());
  });
  for (int n = 0; n < g.nodes(); ++n) {
    out.max_newton_residual = std::max(out.max_newton_residual, resid[n]);
    if (fail[n]) out.ok = false;
  }
  return out;
}

}  // namespace hsurf
