// Command-line interface: fundamental forms, duality, offsets, mixed forms,
// rigidity spectra, metric realization, geodesic search, and the built-in
// verification suite.
//
// Exit codes:
//   0 success (and, for verify, all checks pass)
//   1 command-line usage error
//   2 malformed input file
//   3 inadmissible input (curvature / geodesic conditions violated)
//   4 precondition violation (non-convex surface, focal bound, lost graph)
//   5 solver stall without convergence
//   6 rigidity kernel/gap criteria not met
//   7 other runtime failure

#include <CLI11.hpp>
#include <iostream>

#include "hsurf/deform.hpp"
#include "hsurf/dual.hpp"
#include "hsurf/flows.hpp"
#include "hsurf/io.hpp"
#include "hsurf/lorentz.hpp"
#include "hsurf/projective.hpp"
#include "hsurf/random_surface.hpp"
#include "hsurf/realize.hpp"
#include "hsurf/surface.hpp"

namespace {

using namespace hsurf;

constexpr int kExitMalformed = 2;
constexpr int kExitInadmissible = 3;
constexpr int kExitPrecondition = 4;
constexpr int kExitStall = 5;
constexpr int kExitRigidity = 6;
constexpr int kExitOther = 7;

struct Common {
  std::string config_path;
  std::string report_path;
  int threads = 1;
  unsigned seed = 1;
  double tol = 1e-10;
  bool threads_set = false, seed_set = false, tol_set = false;

  // config file values apply only where no flag was given (flags win)
  void apply_config() {
    if (config_path.empty()) return;
    auto kv = load_config(config_path);
    auto get = [&](const char* k) -> const std::string* {
      auto it = kv.find(k);
      return it == kv.end() ? nullptr : &it->second;
    };
    if (!threads_set)
      if (auto* v = get("threads")) threads = std::stoi(*v);
    if (!seed_set)
      if (auto* v = get("seed")) seed = (unsigned)std::stoul(*v);
    if (!tol_set)
      if (auto* v = get("tol")) tol = std::stod(*v);
  }

  void emit(const CheckReport& rep) const {
    if (report_path.empty())
      std::cout << rep.to_json().dump(2) << "\n";
    else
      rep.save(report_path);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--report", c.report_path, "write the JSON report here");
  cmd->add_option("--threads", c.threads, "worker thread hint")
      ->each([&](const std::string&) { c.threads_set = true; });
  cmd->add_option("--seed", c.seed, "random seed")
      ->each([&](const std::string&) { c.seed_set = true; });
  cmd->add_option("--tol", c.tol, "solver tolerance")
      ->each([&](const std::string&) { c.tol_set = true; });
}

// discretization-error budget for grid-stencil residuals
double h2_budget(const SphereGrid& g, double c = 100.0) {
  double h = g.dtheta();
  return c * h * h;
}

// -------------------------------------------------------------------------

int cmd_forms(const std::string& surf, Common& c) {
  RadialSurface s = load_surf_grid(surf);
  FrameField f = embed(s, false, c.threads);
  SurfaceForms forms = fundamental_forms(f, c.threads);
  GaussCodazzi gc = gauss_codazzi_residuals(forms.I, forms.B);
  double gr = 0, cr = 0;
  for (const auto& v : gc.gauss.raw()) gr = std::max(gr, std::abs(v[0]));
  for (const auto& v : gc.codazzi.raw()) cr = std::max(cr, std::abs(v[0]));
  ScalarField K = gauss_curvature(forms.I);
  double kmin = K.raw()[0][0], kmax = kmin;
  for (const auto& v : K.raw()) {
    kmin = std::min(kmin, v[0]);
    kmax = std::max(kmax, v[0]);
  }
  CheckReport rep;
  rep.add("second_form_symmetry", forms.max_asym, h2_budget(s.grid));
  rep.add("gauss_residual", gr, h2_budget(s.grid));
  rep.add("codazzi_residual", cr, h2_budget(s.grid));
  rep.add_flag("convex", forms.nonconvex.empty());
  rep.add("area", surface_area(forms.I), 1e300);
  rep.add("curvature_min", kmin, 1e300);
  rep.add("curvature_max", kmax, 1e300);
  c.emit(rep);
  if (!forms.nonconvex.empty()) return kExitPrecondition;
  return 0;
}

int cmd_dualize(const std::string& surf, Common& c) {
  RadialSurface s = load_surf_grid(surf);
  FrameField f = embed(s, false, c.threads);
  SurfaceForms forms = fundamental_forms(f, c.threads);
  if (!forms.nonconvex.empty()) return kExitPrecondition;
  DualSurface d = dualize(f, c.threads);
  double m13 = 0, m22 = 0, dd = 0;
  const SphereGrid& g = s.grid;
  DualSurface ddual = dualize(d.frame, c.threads);
  for (int n = 0; n < g.nodes(); ++n) {
    m13 = std::max(
        m13, (d.forms.I.raw()[n] - forms.III.raw()[n]).cwiseAbs().maxCoeff());
    m22 = std::max(
        m22, (d.forms.II.raw()[n] - forms.II.raw()[n]).cwiseAbs().maxCoeff());
    dd = std::max(
        dd, (ddual.frame.x.raw()[n] - f.x.raw()[n]).cwiseAbs().maxCoeff());
  }
  CheckReport rep;
  rep.add("dual_metric_vs_third_form", m13, h2_budget(g));
  rep.add("dual_second_form_match", m22, h2_budget(g));
  rep.add("double_dual_position", dd, h2_budget(g));
  c.emit(rep);
  return 0;
}

int cmd_offset(const std::string& surf, double t, bool inward,
               const std::string& out, Common& c) {
  RadialSurface s = load_surf_grid(surf);
  double teff = inward ? -std::abs(t) : t;
  FrameField f = embed(s, false, c.threads);
  SurfaceForms forms = fundamental_forms(f, c.threads);
  if (!forms.nonconvex.empty()) return kExitPrecondition;
  SurfaceForms oforms = offset_forms(forms, teff);

  // cross-check against the flowed positions in the same chart
  const SphereGrid& g = s.grid;
  AmbientField y(g);
  double ch = std::cosh(teff), sh = std::sinh(teff);
  for (int n = 0; n < g.nodes(); ++n)
    y.raw()[n] = ch * f.x.raw()[n] - sh * f.N.raw()[n];
  FrameField yf;
  yf.grid = g;
  yf.x = y;
  yf.xth = d_theta(y);
  yf.xph = d_phi(y);
  yf.N = AmbientField(g);
  for (int n = 0; n < g.nodes(); ++n) {
    Vec4 nn = tangent_cross(y.raw()[n], yf.xth.raw()[n], yf.xph.raw()[n]);
    nn /= std::sqrt(mink(nn, nn));
    Vec4 interior = ch * f.N.raw()[n] - sh * f.x.raw()[n];  // flowed normal
    if (mink(nn, interior) < 0) nn = -nn;
    yf.N.raw()[n] = nn;
  }
  SurfaceForms fforms = fundamental_forms(yf, c.threads);
  double cross = 0;
  for (int n = 0; n < g.nodes(); ++n)
    cross = std::max(
        cross, (fforms.I.raw()[n] - oforms.I.raw()[n]).cwiseAbs().maxCoeff());

  RadialSurface os = offset_surface(s, teff, c.threads);
  if (!out.empty()) save_surf_grid(out, os);

  CheckReport rep;
  rep.add("cross_pipeline_metric", cross, h2_budget(g));
  rep.add_flag("offset_convex", oforms.nonconvex.empty());
  c.emit(rep);
  return 0;
}

int cmd_mixed(const std::string& surf, double k0, const std::string& variant,
              Common& c) {
  RadialSurface s = load_surf_grid(surf);
  FrameField f = embed(s, false, c.threads);
  SurfaceForms forms = fundamental_forms(f, c.threads);
  if (!forms.nonconvex.empty()) return kExitPrecondition;
  MixedVariant mv;
  if (variant == "cor-I")
    mv = MixedVariant::corI;
  else if (variant == "cor-III")
    mv = MixedVariant::corIII;
  else
    throw CLI::ValidationError("--variant must be cor-I or cor-III");
  GeodesicOptions go;
  go.seed = c.seed;
  MixedForm m = mixed_form(forms, k0, mv, go);
  CheckReport rep;
  rep.add_flag("admissible", m.adm.admissible);
  rep.add("curvature_min", m.adm.kmin, 1e300);
  rep.add("curvature_max", m.adm.kmax, 1e300);
  rep.add("curvature_margin", -m.adm.curvature_margin, 0.0);
  if (mv == MixedVariant::corIII)
    rep.add("geodesic_margin", -m.adm.geodesic_margin, 0.0);
  c.emit(rep);
  return m.adm.admissible ? 0 : kExitInadmissible;
}

int cmd_rigidity(const std::string& surf, const std::string& which,
                 Common& c) {
  RadialSurface s = load_surf_grid(surf);
  FrameField f = embed(s, false, c.threads);
  RigidityKind kind;
  if (which == "I")
    kind = RigidityKind::deltaI;
  else if (which == "III")
    kind = RigidityKind::deltaIII;
  else if (which == "euclid")
    kind = RigidityKind::euclid;
  else
    throw CLI::ValidationError("--which must be I, III, or euclid");
  RigiditySpectrum sp = rigidity_kernel(f.x, kind, c.seed);
  int small = 0;
  for (double v : sp.svals)
    if (v <= 1e-6 * sp.smax) ++small;
  double gap = sp.svals[6] / std::max(sp.svals[5], 1e-300);
  CheckReport rep;
  rep.add_flag("kernel_dimension_6", small == 6);
  rep.add("gap_inverse", 1.0 / gap, 0.1);  // s7/s6 >= 10
  rep.add("killing_angle", sp.killing_angle, 1e-3);
  rep.add("s6_over_smax", sp.svals[5] / sp.smax, 1e-6);
  rep.add("smax", sp.smax, 1e300);
  c.emit(rep);
  bool ok = small == 6 && gap >= 10.0 && sp.killing_angle <= 1e-3;
  return ok ? 0 : kExitRigidity;
}

int cmd_realize(const std::string& target, bool third,
                const std::string& init_path, const std::string& out,
                Common& c) {
  FormField h = load_metric_grid(target);
  RadialSurface init;
  if (!init_path.empty())
    init = load_surf_grid(init_path);
  else {
    init = round_initialization(h);
    if (c.seed_set) {
      // seeded jitter of the initial guess (basin probing)
      RadialSurface pert = random_radial_surface(
          h.grid(), 0.0, 0.05, 4, c.seed);
      for (int n = 0; n < h.grid().nodes(); ++n)
        init.rho.raw()[n][0] += pert.rho.raw()[n][0];
    }
  }
  RealizeOptions o;
  o.tol = c.tol;
  o.threads = c.threads;
  auto [s, rep] = third ? realize_third_form(h, init, o)
                        : realize_metric(h, init, o);
  if (!out.empty()) save_surf_grid(out, s);
  CheckReport cr;
  cr.add("final_residual", rep.final_residual, o.tol);
  cr.add_flag("converged", rep.converged);
  cr.add("jacobian_fd_error", rep.jacobian_fd_error, 1e-6);
  cr.add("convexity_margin", -rep.convexity_margin, 0.0);
  cr.add("iterations", rep.iterations, 1e300);
  c.emit(cr);
  if (!rep.converged) return kExitStall;
  return 0;
}

int cmd_geodesics(const std::string& target, Common& c) {
  FormField h = load_metric_grid(target);
  GeodesicOptions o;
  o.seed = c.seed;
  GeodesicResult r = shortest_closed_geodesic(h, o);
  CheckReport rep;
  rep.add("shortest_length", r.length, 1e300);
  rep.add("margin_over_2pi", 2.0 * M_PI - r.length, 0.0);
  rep.add_flag("converged", r.converged);
  c.emit(rep);
  return 0;
}

// -------------------------------------------------------------------------
// verify: the built-in invariant suite.

FormField round_metric(const SphereGrid& g, double scale2) {
  FormField h = make_form(g);
  for (int i = 0; i < g.n_theta; ++i) {
    double st = std::sin(g.theta(i));
    for (int j = 0; j < g.n_phi; ++j)
      h.at(i, j) = Eigen::Vector3d(scale2, 0.0, scale2 * st * st);
  }
  return h;
}

int cmd_verify(const std::string& level, Common& c) {
  CheckReport rep;
  SphereGrid g(48, 96);

  {  // sphere oracles at rho = 1
    RadialSurface s(g, 1.0);
    FrameField f = embed(s, false, c.threads);
    SurfaceForms forms = fundamental_forms(f, c.threads);
    double s2 = std::sinh(1.0) * std::sinh(1.0);
    double sc = std::sinh(1.0) * std::cosh(1.0);
    double c2 = std::cosh(1.0) * std::cosh(1.0);
    double e1 = 0, e2 = 0, e3 = 0;
    for (int i = 0; i < g.n_theta; ++i) {
      double st = std::sin(g.theta(i));
      Eigen::Vector3d can(1.0, 0.0, st * st);
      for (int j = 0; j < g.n_phi; ++j) {
        e1 = std::max(e1,
                      (forms.I.at(i, j) - s2 * can).cwiseAbs().maxCoeff());
        e2 = std::max(e2,
                      (forms.II.at(i, j) - sc * can).cwiseAbs().maxCoeff());
        e3 = std::max(e3,
                      (forms.III.at(i, j) - c2 * can).cwiseAbs().maxCoeff());
      }
    }
    rep.add("sphere_first_form", e1, 1e-8);
    rep.add("sphere_second_form", e2, 5e-4);
    rep.add("sphere_third_form", e3, 5e-4);
  }

  {  // duality on a random convex surface
    RadialSurface s = random_radial_surface(g, 1.0, 0.1, 4, 2024);
    FrameField f = embed(s, false, c.threads);
    SurfaceForms forms = fundamental_forms(f, c.threads);
    DualSurface d = dualize(f, c.threads);
    double m = 0;
    for (int n = 0; n < g.nodes(); ++n)
      m = std::max(
          m, (d.forms.I.raw()[n] - forms.III.raw()[n]).cwiseAbs().maxCoeff());
    rep.add("duality_metric_vs_third", m, 2e-3);
  }

  {  // Pogorelov: psi_H base-point independence and Killing gluing
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    double spread = 0;
    for (int t = 0; t < 20; ++t) {
      Mat4 m = Mat4::Zero();
      const auto& basis = so31_basis();
      for (int k = 0; k < 6; ++k) m += nd(rng) * basis[k];
      KillingElement k(m);
      EuclideanKilling ref =
          psi_H(k, HPoint::project(Vec4(2, 0.3, -0.2, 0.9)));
      for (int p = 0; p < 20; ++p) {
        Vec3 q(nd(rng), nd(rng), nd(rng));
        q *= 0.8 / std::max(q.norm(), 1.0);
        if (q.norm() < 1e-2) continue;
        EuclideanKilling e = psi_H(k, phi_H_inv(KleinPoint(q)));
        spread = std::max(spread, (e.a - ref.a).cwiseAbs().maxCoeff());
        spread = std::max(spread, (e.b - ref.b).cwiseAbs().maxCoeff());
      }
    }
    rep.add("pogorelov_killing_spread", spread, 1e-9);
  }

  {  // offsets and mixed forms, closed-form identities on the sphere
    RadialSurface s(g, 1.0);
    FrameField f = embed(s, false, c.threads);
    SurfaceForms forms = fundamental_forms(f, c.threads);
    SurfaceForms of = offset_forms(forms, 0.5);
    double s2 = std::sinh(1.5) * std::sinh(1.5);
    double err = 0;
    for (int i = 0; i < g.n_theta; ++i) {
      double st = std::sin(g.theta(i));
      Eigen::Vector3d can(1.0, 0.0, st * st);
      for (int j = 0; j < g.n_phi; ++j)
        err = std::max(err,
                       (of.I.at(i, j) - s2 * can).cwiseAbs().maxCoeff());
    }
    // the sphere pipeline carries O(h^4) normal-derivative error into II/III
    rep.add("offset_sphere_identity", err, 5e-3);

    MixedForm mi = mixed_form(forms, 0.3, MixedVariant::corI);
    double t0 = std::atanh(0.3);
    SurfaceForms oi = offset_forms(forms, -t0);
    double merr = 0;
    for (int n = 0; n < g.nodes(); ++n)
      merr = std::max(merr, (mi.h.raw()[n] - (1 - 0.09) * oi.I.raw()[n])
                                .cwiseAbs()
                                .maxCoeff());
    rep.add("mixed_scaling_identity", merr, 1e-10);
  }

  if (level == "full") {
    {  // rigidity kernel on the sphere
      SphereGrid gr(32, 64);
      RadialSurface s(gr, 1.0);
      FrameField f = embed(s, false, c.threads);
      RigiditySpectrum sp = rigidity_kernel(f.x, RigidityKind::deltaI, c.seed);
      rep.add("rigidity_s6_rel", sp.svals[5] / sp.smax, 1e-6);
      rep.add("rigidity_gap_inv",
              sp.svals[5] / std::max(sp.svals[6], 1e-300), 0.1);
      rep.add("rigidity_killing_angle", sp.killing_angle, 5e-3);
    }
    {  // geodesic search on the round metric
      GeodesicResult r = shortest_closed_geodesic(round_metric(g, 1.0));
      rep.add("round_geodesic_2pi", std::abs(r.length - 2.0 * M_PI), 1e-6);
    }
    {  // realization of the analytic sphere metric
      SphereGrid gr(32, 64);
      FormField h = round_metric(gr, std::sinh(1.0) * std::sinh(1.0));
      RealizeOptions o;
      o.threads = c.threads;
      auto [s, r] = realize_metric(h, RadialSurface(gr, 1.2), o);
      double err = 0;
      for (const auto& v : s.rho.raw()) err = std::max(err, std::abs(v[0] - 1.0));
      rep.add("realize_sphere_rho", err, 1e-8);
      rep.add("realize_jacobian_fd", r.jacobian_fd_error, 1e-6);
    }
  }

  c.emit(rep);
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex surfaces in hyperbolic 3-space: forms, duals, "
               "rigidity, and prescribed-metric realization"};
  app.require_subcommand(1);

  std::string surf, target, out, variant = "cor-I", which = "I",
                            level = "fast", init_path;
  double t = 0.0, k0 = 0.3;
  bool inward = false, third = false;
  Common common;

  auto* c_forms = app.add_subcommand("forms", "fundamental forms + curvature");
  c_forms->add_option("surf", surf, "surf-grid file")->required();
  add_common(c_forms, common);

  auto* c_dual = app.add_subcommand("dualize", "dual surface residuals");
  c_dual->add_option("surf", surf)->required();
  add_common(c_dual, common);

  auto* c_off = app.add_subcommand("offset", "equidistant surface");
  c_off->add_option("surf", surf)->required();
  c_off->add_option("--t", t, "offset distance")->required();
  c_off->add_flag("--inward", inward, "offset toward the interior");
  c_off->add_option("--out", out, "write the offset surface here");
  add_common(c_off, common);

  auto* c_mixed = app.add_subcommand("mixed", "mixed boundary form");
  c_mixed->add_option("surf", surf)->required();
  c_mixed->add_option("--k0", k0, "curvature parameter in (0,1)")->required();
  c_mixed->add_option("--variant", variant, "cor-I or cor-III");
  add_common(c_mixed, common);

  auto* c_rig = app.add_subcommand("rigidity", "rigidity spectrum");
  c_rig->add_option("surf", surf)->required();
  c_rig->add_option("--which", which, "I, III, or euclid");
  add_common(c_rig, common);

  auto* c_real = app.add_subcommand("realize", "realize a prescribed form");
  c_real->add_option("--target", target, "metric-grid JSON file")->required();
  c_real->add_flag("--third", third, "prescribe the third form instead");
  c_real->add_option("--init", init_path, "initial surf-grid (default round)");
  c_real->add_option("--out", out, "write the realized surface here");
  add_common(c_real, common);

  auto* c_ver = app.add_subcommand("verify", "run the invariant suite");
  c_ver->add_option("--level", level, "fast or full");
  add_common(c_ver, common);

  auto* c_geo = app.add_subcommand("geodesics", "shortest closed geodesic");
  c_geo->add_option("metric", target, "metric-grid JSON file")->required();
  add_common(c_geo, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // collapse CLI11's many usage-error codes onto the documented exit 1
    // (--help and friends still exit 0)
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    common.apply_config();
    if (c_forms->parsed()) return cmd_forms(surf, common);
    if (c_dual->parsed()) return cmd_dualize(surf, common);
    if (c_off->parsed()) return cmd_offset(surf, t, inward, out, common);
    if (c_mixed->parsed()) return cmd_mixed(surf, k0, variant, common);
    if (c_rig->parsed()) return cmd_rigidity(surf, which, common);
    if (c_real->parsed())
      return cmd_realize(target, third, init_path, out, common);
    if (c_ver->parsed()) return cmd_verify(level, common);
    if (c_geo->parsed()) return cmd_geodesics(target, common);
  } catch (const hsurf::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::string w = e.what();
    return w.find("inadmissible") != std::string::npos ? kExitInadmissible
                                                       : kExitPrecondition;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::string w = e.what();
    if (w.find("cannot open") != std::string::npos ||
        w.find("truncated") != std::string::npos)
      return kExitMalformed;
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return 1;
}
