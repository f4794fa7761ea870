#include <doctest.h>

#include <random>

#include "hsurf/dual.hpp"
#include "hsurf/projective.hpp"
#include "hsurf/random_surface.hpp"
#include "hsurf/surface.hpp"

using namespace hsurf;

namespace {
HPoint random_hpoint(std::mt19937_64& rng, double max_rho = 1.8) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ur(0.05, max_rho);
  Vec3 d(nd(rng), nd(rng), nd(rng));
  d.normalize();
  double rho = ur(rng);
  return HPoint(lift(std::cosh(rho), std::sinh(rho) * d));
}

// least-squares fit of a Euclidean Killing field a + b x p to samples
std::pair<Vec3, Vec3> fit_euclid_killing(const std::vector<Vec3>& pts,
                                         const std::vector<Vec3>& vals,
                                         double* residual = nullptr) {
  int n = (int)pts.size();
  Eigen::MatrixXd A(3 * n, 6);
  Eigen::VectorXd r(3 * n);
  for (int k = 0; k < n; ++k) {
    Eigen::Matrix3d hat;
    const Vec3& p = pts[k];
    hat << 0, p[2], -p[1], -p[2], 0, p[0], p[1], -p[0], 0;  // b x p = hat * b
    A.block<3, 3>(3 * k, 0) = Eigen::Matrix3d::Identity();
    A.block<3, 3>(3 * k, 3) = hat;
    r.segment<3>(3 * k) = vals[k];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(r);
  if (residual) *residual = (A * c - r).cwiseAbs().maxCoeff();
  return {c.head<3>(), c.tail<3>()};
}
}  // namespace

TEST_CASE("Klein model round trips and tanh radius") {
  CHECK((phi_H(HPoint::center()).p).norm() == 0.0);
  HPoint x(Vec4(std::cosh(1.0), std::sinh(1.0), 0, 0));
  CHECK(phi_H(x).p.norm() == doctest::Approx(std::tanh(1.0)).epsilon(1e-13));

  std::mt19937_64 rng(11);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    HPoint p = random_hpoint(rng);
    HPoint q = phi_H_inv(phi_H(p));
    worst = std::max(worst, (p.v - q.v).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS(phi_H_inv(KleinPoint(Vec3(1.1, 0, 0))));
}

TEST_CASE("de Sitter hemisphere model round trips and coth radius") {
  CHECK_THROWS(phi_S(DSPoint(Vec4(0, 1, 0, 0))));
  // dual point of the plane at distance rho from the center along e1
  double rho = 0.8;
  DSPoint d(Vec4(std::sinh(rho), std::cosh(rho), 0, 0));
  CHECK(phi_S(d).p.norm() == doctest::Approx(1.0 / std::tanh(rho)).epsilon(1e-13));

  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    Vec3 s(nd(rng), nd(rng), nd(rng));
    double t0 = std::abs(nd(rng));
    Vec4 v = lift(t0, s * std::sqrt((1.0 + t0 * t0) / s.squaredNorm()));
    DSPoint p(v);
    DSPoint q = phi_S_inv(phi_S(p));
    worst = std::max(worst, (p.v - q.v).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS(phi_S_inv(KleinPoint(Vec3(0.5, 0, 0))));
}

TEST_CASE("dphi contracts lateral by 1/cosh and radial by 1/cosh^2") {
  double rho = 1.0;
  HPoint x(Vec4(std::cosh(rho), std::sinh(rho), 0, 0));
  Vec4 lateral(0, 0, 1, 0);                                 // unit, tangent
  Vec4 radial(std::sinh(rho), std::cosh(rho), 0, 0);        // unit, tangent
  CHECK(dphi_H(x, lateral).norm() ==
        doctest::Approx(1.0 / std::cosh(rho)).epsilon(1e-13));
  CHECK(dphi_H(x, radial).norm() ==
        doctest::Approx(1.0 / (std::cosh(rho) * std::cosh(rho)))
            .epsilon(1e-13));
  // at the center any unit tangent maps to a Euclidean unit vector
  CHECK(dphi_H(HPoint::center(), Vec4(0, 0, 0, 1)).norm() ==
        doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("point-plane duality: involution and Klein tangency") {
  // plane through the center normal to e1 has dual (0,1,0,0)
  HPlane pl = plane_through(HPoint::center(), Vec4(0, 1, 0, 0));
  CHECK((dual_of_plane(pl).v - Vec4(0, 1, 0, 0)).cwiseAbs().maxCoeff() <
        1e-14);

  std::mt19937_64 rng(13);
  for (int t = 0; t < 1000; ++t) {
    HPoint x = random_hpoint(rng);
    HPoint back = dual_of_plane(dual_of_point(x));
    CHECK((back.v - x.v).cwiseAbs().maxCoeff() < 1e-10);
    // the plane dual to a unit normal at x passes through x: the defining
    // pairing against the dual point vanishes
    Vec4 n = project_tangent(x.v, Vec4(0.3, 1.1, -0.2, 0.7));
    n /= std::sqrt(mink(n, n));
    DSPoint d = dual_of_plane(plane_through(x, n));
    CHECK(std::abs(mink(d.v, x.v)) < 1e-9);
  }

  // Klein tangency: for a plane at distance rho, the dual's Klein image p*
  // sits at radius coth(rho) while the plane's trace is the circle at radius
  // tanh(rho); lines from p* to that circle are tangent to the unit sphere.
  double rho = 0.9;
  Vec3 pstar(1.0 / std::tanh(rho), 0, 0);
  // boundary circle of the plane's Klein trace: center (tanh rho,0,0) in the
  // plane x1 = tanh(rho), radius sqrt(1 - tanh^2)
  double rt = std::tanh(rho), rc = std::sqrt(1.0 - rt * rt);
  for (int k = 0; k < 16; ++k) {
    double a = 2.0 * M_PI * k / 16;
    Vec3 q(rt, rc * std::cos(a), rc * std::sin(a));
    // distance from origin to the line p* + s (q - p*)
    Vec3 u = (q - pstar).normalized();
    double dist = (pstar - pstar.dot(u) * u).norm();
    CHECK(std::abs(dist - 1.0) < 1e-9);
  }
}

TEST_CASE("pogorelov map: radial norm preserved, lateral contracted") {
  double rho = 1.0;
  HPoint x(Vec4(std::cosh(rho), std::sinh(rho), 0, 0));
  Vec4 lateral(0, 0, 1, 0);
  Vec4 radial(std::sinh(rho), std::cosh(rho), 0, 0);
  auto il = pogorelov_phi_H(x, lateral);
  auto ir = pogorelov_phi_H(x, radial);
  CHECK(il.vec.norm() == doctest::Approx(1.0 / std::cosh(rho)).epsilon(1e-12));
  CHECK(ir.vec.norm() == doctest::Approx(1.0).epsilon(1e-12));
  // radial image is parallel to the Euclidean radial direction
  CHECK(ir.vec.cross(il.base.p).norm() < 1e-12);

  // de Sitter side: purely radial unit vector keeps its norm
  DSPoint y(Vec4(std::sinh(rho), std::cosh(rho), 0, 0));
  Vec4 yrad = radial_dir_S(y);
  auto is = pogorelov_phi_S(y, yrad);
  CHECK(is.vec.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pogorelov image of a Killing field is a Euclidean Killing field") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> nd;
  const auto& basis = so31_basis();
  for (int t = 0; t < 5; ++t) {
    Mat4 m = Mat4::Zero();
    for (int k = 0; k < 6; ++k) m += nd(rng) * basis[k];
    std::vector<Vec3> pts, vals;
    for (int s = 0; s < 40; ++s) {
      HPoint x = random_hpoint(rng);
      auto im = pogorelov_phi_H(x, m * x.v);
      pts.push_back(im.base.p);
      vals.push_back(im.vec);
    }
    double res = 0;
    fit_euclid_killing(pts, vals, &res);
    CHECK(res < 1e-9);
  }
}

TEST_CASE("interior and exterior pogorelov images glue to one Killing field") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> nd;
  const auto& basis = so31_basis();
  for (int t = 0; t < 5; ++t) {
    Mat4 m = Mat4::Zero();
    for (int k = 0; k < 6; ++k) m += nd(rng) * basis[k];
    // interior fit from H^3 samples
    std::vector<Vec3> pi, vi, pe, ve;
    for (int s = 0; s < 40; ++s) {
      HPoint x = random_hpoint(rng);
      auto im = pogorelov_phi_H(x, m * x.v);
      pi.push_back(im.base.p);
      vi.push_back(im.vec);
    }
    // exterior fit from de Sitter hemisphere samples
    for (int s = 0; s < 40; ++s) {
      Vec3 d(nd(rng), nd(rng), nd(rng));
      d.normalize();
      double rho = 0.3 + 1.2 * std::abs(nd(rng));
      DSPoint y(lift(std::sinh(rho), std::cosh(rho) * d));
      auto im = pogorelov_phi_S(y, m * y.v);
      pe.push_back(im.base.p);
      ve.push_back(im.vec);
    }
    auto [ai, bi] = fit_euclid_killing(pi, vi);
    auto [ae, be] = fit_euclid_killing(pe, ve);
    CHECK((ai - ae).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((bi - be).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("psi_H closed forms for the four pure parts") {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    HPoint x = random_hpoint(rng);
    Vec3 xb = phi_H(x).p;
    double r = xb.norm();
    Vec3 rbar = xb / r;
    double cr = 1.0 / std::sqrt(1.0 - r * r);  // cosh(rho)
    Vec4 rdir = radial_dir_H(x);

    // a unit lateral tangent direction and its Euclidean image direction
    Vec4 w = project_tangent(x.v, Vec4(nd(rng), nd(rng), nd(rng), nd(rng)));
    Vec4 lat = w - mink(w, rdir) * rdir;
    lat /= std::sqrt(mink(lat, lat));
    Vec3 vbar = dphi_H(x, lat).normalized();

    // radial translation -> (rbar, 0)
    {
      EuclideanKilling ek = psi_H(killing_compose(rdir, Vec4::Zero(), x), x);
      CHECK((ek.a - rbar).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(ek.b.cwiseAbs().maxCoeff() < 1e-12);
    }
    // radial rotation -> (0 at xb, rbar)
    {
      EuclideanKilling ek = psi_H(killing_compose(Vec4::Zero(), rdir, x), x);
      CHECK(ek.value(xb).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((ek.b - rbar).cwiseAbs().maxCoeff() < 1e-12);
    }
    // unit lateral translation -> (sqrt(1-r^2) vbar, -(r/sqrt(1-r^2)) rbar^vbar)
    {
      EuclideanKilling ek = psi_H(killing_compose(lat, Vec4::Zero(), x), x);
      auto [val, rot] = ek.decompose_at(xb);
      CHECK((val - vbar / cr).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((rot + r * cr * rbar.cross(vbar)).cwiseAbs().maxCoeff() < 1e-12);
    }
    // unit lateral rotation -> (0, vbar/sqrt(1-r^2))
    {
      EuclideanKilling ek = psi_H(killing_compose(Vec4::Zero(), lat, x), x);
      auto [val, rot] = ek.decompose_at(xb);
      CHECK(val.cwiseAbs().maxCoeff() < 1e-12);
      CHECK((rot - cr * vbar).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("psi_H is independent of the evaluation point") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  const auto& basis = so31_basis();
  for (int t = 0; t < 10; ++t) {
    Mat4 m = Mat4::Zero();
    for (int k = 0; k < 6; ++k) m += nd(rng) * basis[k];
    KillingElement k(m);
    EuclideanKilling ref = psi_H(k, random_hpoint(rng));
    double spread = 0;
    for (int s = 0; s < 100; ++s) {
      EuclideanKilling ek = psi_H(k, random_hpoint(rng));
      spread = std::max(spread, (ek.a - ref.a).cwiseAbs().maxCoeff());
      spread = std::max(spread, (ek.b - ref.b).cwiseAbs().maxCoeff());
    }
    CHECK(spread < 1e-9);

    // agreement with the pointwise pogorelov image of the field of k
    for (int s = 0; s < 20; ++s) {
      HPoint x = random_hpoint(rng);
      auto im = pogorelov_phi_H(x, m * x.v);
      CHECK((ref.value(im.base.p) - im.vec).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("projective transform of II matches the Klein image directly") {
  SphereGrid g(48, 96);
  RadialSurface s = random_radial_surface(g, 1.0, 0.08, 3, 77);
  FrameField f = embed(s);
  SurfaceForms sf = fundamental_forms(f);
  FormField predicted = projective_II_transform(f, sf.II);
  SurfaceForms ef = euclidean_forms(klein_image(f));
  double worst = 0, scale = 0;
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      worst = std::max(worst, (form_mat(predicted, i, j) -
                               form_mat(ef.II, i, j))
                                  .cwiseAbs()
                                  .maxCoeff());
      scale = std::max(scale, form_mat(ef.II, i, j).cwiseAbs().maxCoeff());
    }
  CHECK(worst / scale < 5e-4);  // grid truncation of the direct computation
}

TEST_CASE("projective sphere scaling: I and II both scale by cosh^2") {
  // geodesic sphere radius rho maps to a Euclidean sphere of radius tanh(rho)
  // with I = cosh^2(rho) Ibar and II = cosh^2(rho) IIbar
  SphereGrid g(32, 64);
  for (double rho : {0.5, 1.0, 2.0}) {
    RadialSurface s(g, rho);
    FrameField f = embed(s);
    SurfaceForms sf = fundamental_forms(f);
    SurfaceForms ef = euclidean_forms(klein_image(f));
    double c2 = std::cosh(rho) * std::cosh(rho);
    double worst = 0;
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j) {
        worst = std::max(worst, (form_mat(sf.I, i, j) -
                                 c2 * form_mat(ef.I, i, j))
                                    .cwiseAbs()
                                    .maxCoeff() /
                                    form_mat(sf.I, i, j).cwiseAbs().maxCoeff());
        worst = std::max(worst,
                         (form_mat(sf.II, i, j) - c2 * form_mat(ef.II, i, j))
                                 .cwiseAbs()
                                 .maxCoeff() /
                             form_mat(sf.II, i, j).cwiseAbs().maxCoeff());
      }
    CHECK(worst < 5e-4);
  }
}
