#pragma once

// Structured latitude-longitude grid over S^2 with half-offset latitudes
// (no node sits on a pole).  Fields are extended across the poles by the
// antipodal-in-phi rule; chart-tensor components pick up a sign per theta
// index, tracked here as a per-component parity.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hsurf/lorentz.hpp"

namespace hsurf {

struct SphereGrid {
  int n_theta = 0;
  int n_phi = 0;

  SphereGrid() = default;
  SphereGrid(int nt, int np) : n_theta(nt), n_phi(np) {
    if (nt < 4 || np < 8 || np % 2 != 0)
      throw std::invalid_argument("SphereGrid: need n_theta>=4, even n_phi>=8");
  }

  int nodes() const { return n_theta * n_phi; }
  double theta(int i) const { return M_PI * (i + 0.5) / n_theta; }
  double phi(int j) const { return 2.0 * M_PI * j / n_phi; }
  double dtheta() const { return M_PI / n_theta; }
  double dphi() const { return 2.0 * M_PI / n_phi; }
  int index(int i, int j) const { return i * n_phi + j; }

  // unit direction on S^2
  Vec3 dir(int i, int j) const {
    double t = theta(i), p = phi(j);
    return Vec3(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p),
                std::cos(t));
  }
  Vec3 dir_theta(int i, int j) const {
    double t = theta(i), p = phi(j);
    return Vec3(std::cos(t) * std::cos(p), std::cos(t) * std::sin(p),
                -std::sin(t));
  }
  Vec3 dir_phi(int i, int j) const {
    double t = theta(i), p = phi(j);
    return Vec3(-std::sin(t) * std::sin(p), std::sin(t) * std::cos(p), 0.0);
  }

  // Maps a possibly out-of-range latitude index into the grid, returning the
  // antipodal-in-phi image and whether a pole was crossed (sign flip for
  // odd-parity components).
  void wrap(int i, int j, int& ii, int& jj, bool& flipped) const {
    flipped = false;
    ii = i;
    jj = j;
    if (ii < 0) {
      ii = -1 - ii;
      jj += n_phi / 2;
      flipped = true;
    } else if (ii >= n_theta) {
      ii = 2 * n_theta - 1 - ii;
      jj += n_phi / 2;
      flipped = true;
    }
    jj = ((jj % n_phi) + n_phi) % n_phi;
  }
};

// Per-node field of fixed-size vectors with a theta-parity per component.
// parity +1: plain function on the sphere (scalars, ambient components);
// parity -1: flips sign under the antipodal pole crossing (e.g. a theta
// chart index).
template <int N>
class GridField {
 public:
  using Value = Eigen::Matrix<double, N, 1>;

  GridField() = default;
  GridField(const SphereGrid& g, const Value& parity)
      : grid_(g), parity_(parity), data_(g.nodes(), Value::Zero()) {}
  explicit GridField(const SphereGrid& g)
      : GridField(g, Value::Ones()) {}

  const SphereGrid& grid() const { return grid_; }
  const Value& parity() const { return parity_; }

  Value& at(int i, int j) { return data_[grid_.index(i, j)]; }
  const Value& at(int i, int j) const { return data_[grid_.index(i, j)]; }

  // ghost-aware access
  Value get(int i, int j) const {
    int ii, jj;
    bool flip;
    grid_.wrap(i, j, ii, jj, flip);
    Value v = data_[grid_.index(ii, jj)];
    if (flip) v = v.cwiseProduct(parity_);
    return v;
  }

  std::vector<Value>& raw() { return data_; }
  const std::vector<Value>& raw() const { return data_; }

 private:
  SphereGrid grid_;
  Value parity_ = Value::Ones();
  std::vector<Value> data_;
};

using ScalarField = GridField<1>;
using AmbientField = GridField<4>;   // R^4_1 components, parity +
using Ambient3Field = GridField<3>;  // R^3 components, parity +

// 4th-order centered first-derivative stencil.
inline constexpr std::array<double, 5> kStencil5 = {1.0 / 12.0, -8.0 / 12.0,
                                                   0.0, 8.0 / 12.0,
                                                   -1.0 / 12.0};

template <int N>
GridField<N> d_theta(const GridField<N>& f) {
  const SphereGrid& g = f.grid();
  GridField<N> out(g, -f.parity());
  double h = g.dtheta();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      typename GridField<N>::Value acc = GridField<N>::Value::Zero();
      for (int k = -2; k <= 2; ++k)
        if (kStencil5[k + 2] != 0.0) acc += kStencil5[k + 2] * f.get(i + k, j);
      out.at(i, j) = acc / h;
    }
  return out;
}

template <int N>
GridField<N> d_phi(const GridField<N>& f) {
  const SphereGrid& g = f.grid();
  GridField<N> out(g, f.parity());
  double h = g.dphi();
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      typename GridField<N>::Value acc = GridField<N>::Value::Zero();
      for (int k = -2; k <= 2; ++k)
        if (kStencil5[k + 2] != 0.0) acc += kStencil5[k + 2] * f.get(i, j + k);
      out.at(i, j) = acc / h;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral nodal derivatives on the doubled torus.  A grid field extends to a
// doubly periodic function on (2 n_theta) x n_phi samples by the antipodal
// rule; differentiating its Fourier series and evaluating back at the sample
// points is exact for band-limited data.  The half-sample theta offset drops
// out because differentiation is diagonal in frequency space.  Chart-singular
// combinations (Christoffel symbols, curvature) need this: centered-stencil
// truncation gets amplified by inverse powers of sin(theta) near the poles,
// while the spectral error stays at the data's own smoothness level.

namespace detail {

inline void dft_1d(std::vector<std::complex<double>>& a, bool inverse) {
  int n = (int)a.size();
  if ((n & (n - 1)) == 0) {
    // iterative radix-2
    for (int i = 1, j = 0; i < n; ++i) {
      int bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
      double ang = 2.0 * M_PI / len * (inverse ? 1 : -1);
      std::complex<double> wl = std::polar(1.0, ang);
      for (int i = 0; i < n; i += len) {
        std::complex<double> w = 1.0;
        for (int k = 0; k < len / 2; ++k) {
          std::complex<double> u = a[i + k], v = a[i + k + len / 2] * w;
          a[i + k] = u + v;
          a[i + k + len / 2] = u - v;
          w *= wl;
        }
      }
    }
  } else {
    std::vector<std::complex<double>> out(n);
    for (int k = 0; k < n; ++k) {
      std::complex<double> s = 0;
      for (int i = 0; i < n; ++i)
        s += a[i] * std::polar(1.0, 2.0 * M_PI * k * i / n * (inverse ? 1 : -1));
      out[k] = s;
    }
    a = std::move(out);
  }
  if (inverse)
    for (auto& v : a) v /= double(n);
}

inline double signed_freq(int k, int n) {
  if (2 * k == n) return 0.0;  // derivative of the Nyquist cosine mode
  return k <= n / 2 ? k : k - n;
}

}  // namespace detail

// Nodal mixed derivative d_theta^pth d_phi^pph f by spectral
// differentiation, component-wise.  Valid only for fields whose doubled
// extension is smooth (chart components of tensors with the stored parity);
// not for data with genuine pole singularities such as Christoffel symbols.
template <int N>
GridField<N> spectral_derivative(const GridField<N>& f, int pth, int pph) {
  const SphereGrid& g = f.grid();
  int nt2 = 2 * g.n_theta, np = g.n_phi;
  typename GridField<N>::Value out_parity = f.parity();
  if (pth % 2 != 0) out_parity = -out_parity;
  GridField<N> out(g, out_parity);
  std::vector<std::complex<double>> ext(nt2 * np);
  std::vector<std::complex<double>> line;
  for (int c = 0; c < N; ++c) {
    double parity = f.parity()[c];
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < np; ++j) {
        double v = f.at(i, j)[c];
        ext[i * np + j] = v;
        int jj = (j + np / 2) % np;
        ext[(nt2 - 1 - i) * np + j] = parity * f.at(i, jj)[c];
      }
    // forward 2D transform
    line.resize(np);
    for (int i = 0; i < nt2; ++i) {
      for (int j = 0; j < np; ++j) line[j] = ext[i * np + j];
      detail::dft_1d(line, false);
      for (int l = 0; l < np; ++l) ext[i * np + l] = line[l];
    }
    line.resize(nt2);
    for (int l = 0; l < np; ++l) {
      for (int i = 0; i < nt2; ++i) line[i] = ext[i * np + l];
      detail::dft_1d(line, false);
      for (int k = 0; k < nt2; ++k) ext[k * np + l] = line[k];
    }
    // differentiate in frequency space
    for (int k = 0; k < nt2; ++k)
      for (int l = 0; l < np; ++l) {
        std::complex<double> m(1, 0);
        for (int p = 0; p < pth; ++p)
          m *= std::complex<double>(0, detail::signed_freq(k, nt2));
        for (int p = 0; p < pph; ++p)
          m *= std::complex<double>(0, detail::signed_freq(l, np));
        ext[k * np + l] *= m;
      }
    // inverse 2D transform, keeping the physical rows
    line.resize(nt2);
    for (int l = 0; l < np; ++l) {
      for (int k = 0; k < nt2; ++k) line[k] = ext[k * np + l];
      detail::dft_1d(line, true);
      for (int i = 0; i < nt2; ++i) ext[i * np + l] = line[i];
    }
    line.resize(np);
    for (int i = 0; i < g.n_theta; ++i) {
      for (int l = 0; l < np; ++l) line[l] = ext[i * np + l];
      detail::dft_1d(line, true);
      for (int j = 0; j < np; ++j) out.at(i, j)[c] = line[j].real();
    }
  }
  return out;
}

template <int N>
std::pair<GridField<N>, GridField<N>> spectral_derivatives(
    const GridField<N>& f) {
  return {spectral_derivative(f, 1, 0), spectral_derivative(f, 0, 1)};
}

// Midpoint-in-theta, periodic-in-phi quadrature of a nodal density
// (the density must already include the area factor).
inline double integrate(const ScalarField& f) {
  const SphereGrid& g = f.grid();
  double s = 0.0;
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) s += f.at(i, j)[0];
  return s * g.dtheta() * g.dphi();
}

// Deterministic parallel loop over [0, n): each index writes only its own
// outputs, so results are identical for any thread count.
inline void parallel_for(int n, int thread_hint,
                         const std::function<void(int)>& body) {
  int nt = thread_hint > 0 ? thread_hint : 1;
  if (nt <= 1 || n < 256) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  int chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace hsurf
