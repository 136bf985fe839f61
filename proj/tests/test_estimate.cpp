#include <catch2/catch_amalgamated.hpp>

#include "oblab/estimate.hpp"

using namespace oblab;

TEST_CASE("riccati: A = B = 0 returns the configured cap") {
  RiccatiOptions opts;
  opts.eta_cap = 100.0;
  auto res = riccati_eta(0.0, 0.0, 0.0, 1.0, opts);
  CHECK(res.capped);
  CHECK(res.eta_max == Catch::Approx(100.0));
  // chi(z) = eta (z - m)
  CHECK(res.chi(0.5) == Catch::Approx(50.0).epsilon(1e-6));
}

TEST_CASE("riccati: closed-form tangent blow-up thresholds") {
  // chi = sqrt(eta) tan(sqrt(eta) z): finite on [0, L] iff
  // sqrt(eta) L < pi/2, so eta_max = (pi/2L)^2
  auto r1 = riccati_eta(1.0, 0.0, 0.0, 1.0);
  CHECK(r1.eta_max == Catch::Approx(sqr(M_PI / 2.0)).margin(1e-3));
  auto r2 = riccati_eta(1.0, 0.0, 0.0, 2.0);
  CHECK(r2.eta_max == Catch::Approx(sqr(M_PI / 4.0)).margin(1e-3));
}

TEST_CASE("riccati eta is monotone in interval length and in A") {
  auto e1 = riccati_eta(1.0, 0.0, 0.0, 0.5).eta_max;
  auto e2 = riccati_eta(1.0, 0.0, 0.0, 1.0).eta_max;
  auto e3 = riccati_eta(1.0, 0.0, 0.0, 2.0).eta_max;
  CHECK(e1 >= e2);
  CHECK(e2 >= e3);
  auto a1 = riccati_eta(0.5, 0.0, 0.0, 1.0).eta_max;
  auto a2 = riccati_eta(2.0, 0.0, 0.0, 1.0).eta_max;
  CHECK(a1 >= e2);
  CHECK(e2 >= a2);
}

TEST_CASE("build_psi: chi = 0 gives the identity substitution") {
  auto sub = identity_substitution(0.3, 1.7);
  for (double s : {0.0, 0.4, 1.1}) {
    CHECK(sub.psi(s) == Catch::Approx(0.3 + s).epsilon(1e-10));
    CHECK(sub.psi_prime(s) == Catch::Approx(1.0).epsilon(1e-10));
    CHECK(sub.omega(s) == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("build_psi: constant chi has the logarithmic closed form") {
  // chi = c: psi(s) = m - ln(1 - c s)/c
  double c = 0.8, m = 0.1, M = 1.4;
  ChiFunction chi;
  chi.m = m;
  chi.M = M;
  int n = 2048;
  for (int i = 0; i <= n; ++i) {
    double z = m + (M - m) * i / n;
    chi.z.push_back(z);
    chi.val.push_back(c);
  }
  chi.cum.assign(n + 1, 0.0);
  for (int i = 1; i <= n; ++i)
    chi.cum[i] = chi.cum[i - 1] + c * (chi.z[i] - chi.z[i - 1]);
  auto sub = build_psi(chi, m, M);
  for (double s : {0.1, 0.4, 0.7}) {
    double expect = m - std::log(1.0 - c * s) / c;
    if (expect <= M)
      CHECK(sub.psi(s) == Catch::Approx(expect).margin(1e-8));
  }
}

TEST_CASE("build_psi round trip: omega(s) = chi(psi(s))") {
  auto res = riccati_eta(1.0, 0.5, 0.0, 1.0);
  auto sub = build_psi(res.chi, 0.0, 1.0, res.eta_max);
  double worst = 0.0;
  for (int k = 0; k <= 50; ++k) {
    double s = sub.S_total * k / 50.0 * 0.999;
    double lhs = sub.omega(s);
    double rhs = sub.chi(sub.psi(s));
    worst = std::max(worst, std::abs(lhs - rhs));
    // FD check of psi'' against the stored chi relation
    double h = 1e-5;
    if (s > h && s < sub.S_total - h) {
      double fd = (sub.psi_prime(s + h) - sub.psi_prime(s - h)) / (2.0 * h);
      CHECK(fd == Catch::Approx(sub.psi_second(s)).margin(
                      1e-6 * (1.0 + std::abs(fd))));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("small oscillation substitution: chi' = c + 1, chi(m) = 0") {
  auto sub = small_oscillation_substitution(3.0, 0.0, 0.25);
  CHECK(sub.chi(0.0) == Catch::Approx(0.0).margin(1e-14));
  double h = 1e-4;
  double slope = (sub.chi(0.1 + h) - sub.chi(0.1 - h)) / (2.0 * h);
  CHECK(slope == Catch::Approx(4.0).epsilon(1e-6));
}

namespace {

struct CapillaryFixture {
  Domain dom = Domain::interval(0.0, 1.0);
  CapillaryBC bc{HFunction::inverse(), ScalarField::affine_z(0.4, -0.05)};
  FmceEq eq{std::make_shared<PowerScalar>(-0.9272, 0.0)};
  BoundaryConstants cst;
  GridSolution sol;
  Substitution sub;

  explicit CapillaryFixture(int n = 64) {
    SamplePlan plan;
    plan.n_boundary = 2;
    cst = boundary_constants(bc, dom, plan);
    SolverOptions opts;
    opts.continuation_levels = 1;
    sol = solve_elliptic(eq, bc, dom, Mesh1D{0.0, 1.0, n}, {}, opts);
    double m = sol.u.minCoeff(), M = sol.u.maxCoeff();
    if (M - m < 1e-6) M = m + 1e-6;
    auto ric = riccati_eta(1.0, 1.0, m, M);
    sub = build_psi(ric.chi, m, M, ric.eta_max);
  }
};

}  // namespace

TEST_CASE("w-fields: boundary collapse and Neumann interior value") {
  // with Neumann data and psi' = 1, w1 = eps (p.gamma)^2 and w2 = w1 at d=0
  Domain dom = Domain::interval(0.0, 1.0);
  CapillaryBC bc(HFunction::constant(1.0), ScalarField::constant(0.0));
  UniformlyEllipticEq eq;
  auto cst = boundary_constants(bc, dom, SamplePlan{});
  GridSolution sol;
  sol.mesh = Mesh1D{0.0, 1.0, 32};
  sol.u = Vec::Zero(33);
  for (int i = 0; i <= 32; ++i) {
    double x = sol.mesh.x(i);
    sol.u[i] = 0.3 * x * x;  // Du = 0.6 x
  }
  auto sub = identity_substitution(-1.0, 2.0);
  double eps = 1e-2;
  auto f = w_fields(sol, eq, bc, dom, cst, sub, eps);
  // at the boundary node x = 0, N = p.gamma = Du(0)
  CHECK(f.w2[0] == Catch::Approx(f.w1[0]).margin(1e-14));
  int i = 4;  // interior collar node
  double du = sol.Du1(i);
  CHECK(f.w1[i] == Catch::Approx(eps * du * du).epsilon(1e-10));
  CHECK(f.w2[i] >= f.w1[i]);
}

TEST_CASE("substitution identity holds on the solved grid") {
  CapillaryFixture fix;
  auto f = w_fields(fix.sol, fix.eq, fix.bc, fix.dom, fix.cst, fix.sub, 1e-3);
  auto rep = maximum_principle_audit(fix.sol, fix.eq, fix.bc, fix.dom, fix.cst,
                                     fix.sub, f);
  const auto* idcheck = rep.find("E15.17");
  REQUIRE(idcheck);
  INFO("residual " << idcheck->fitted.at("residual"));
  CHECK(idcheck->pass);
}

TEST_CASE("maximum principle audit on the solved capillary case") {
  CapillaryFixture fix;
  auto f = w_fields(fix.sol, fix.eq, fix.bc, fix.dom, fix.cst, fix.sub, 1e-3);
  auto rep = maximum_principle_audit(fix.sol, fix.eq, fix.bc, fix.dom, fix.cst,
                                     fix.sub, f);
  for (const auto& c : rep.checks) {
    INFO(c.id << " margin=" << c.margin << " region=" << c.region);
    CHECK(c.pass);
  }
}

TEST_CASE("field provenance mismatch is rejected") {
  CapillaryFixture fix;
  auto f = w_fields(fix.sol, fix.eq, fix.bc, fix.dom, fix.cst, fix.sub, 1e-3);
  auto other = identity_substitution(-2.0, 2.0);
  CHECK_THROWS_AS(maximum_principle_audit(fix.sol, fix.eq, fix.bc, fix.dom,
                                          fix.cst, other, f),
                  FieldMismatch);
}

TEST_CASE("trivial audit: constant solution has empty superlevel set") {
  Domain dom = Domain::interval(0.0, 1.0);
  CapillaryBC bc(HFunction::constant(1.0), ScalarField::constant(0.0));
  UniformlyEllipticEq eq;
  auto cst = boundary_constants(bc, dom, SamplePlan{});
  GridSolution sol;
  sol.mesh = Mesh1D{0.0, 1.0, 16};
  sol.u = Vec::Constant(17, 1.2);
  auto sub = identity_substitution(0.0, 2.0);
  auto f = w_fields(sol, eq, bc, dom, cst, sub, 1e-2);
  MaxPrincipleOptions opts;
  opts.M1 = 0.5;  // above the identically-zero w1
  auto rep = maximum_principle_audit(sol, eq, bc, dom, cst, sub, f, opts);
  for (const auto& c : rep.checks) CHECK(c.pass);
}

TEST_CASE("zeta cutoff properties on the disk") {
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.3));
  Vec y(2);
  y << 1.0, 0.0;
  auto rep = zeta_cutoff_audit(dom, bc, y, 0.12, 4.0 / 3.0);
  for (const auto& r : rep.results) {
    INFO(r.id << " margin " << r.margin);
    CHECK(r.pass);
  }
}

TEST_CASE("zeta cutoff properties on the interval") {
  Domain dom = Domain::interval(0.0, 1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.2));
  Vec y(1);
  y << 0.0;
  auto rep = zeta_cutoff_audit(dom, bc, y, 0.2, 1.5);
  for (const auto& r : rep.results) {
    INFO(r.id << " margin " << r.margin);
    CHECK(r.pass);
  }
}

TEST_CASE("interior parabolic audit: identity and conclusion") {
  Domain dom = Domain::interval(0.0, 1.0);
  CapillaryParabolicEq eq([](double) { return 1.0; }, [](double) { return 0.0; },
                          ScalarField::constant(0.0));
  CapillaryBC bc(HFunction::constant(1.0), ScalarField::constant(0.0));
  Mesh1D mesh{0.0, 1.0, 48};
  double dt = 1.0 / (48 * 48);
  auto sol = solve_parabolic(eq, bc, dom, mesh,
                             [](double x) { return 0.5 * std::cos(M_PI * x); },
                             0.04, dt);
  auto res = interior_parabolic_audit(sol, eq, 0.5, 0.4, 0.1);
  for (const auto& c : res.report.checks) {
    INFO(c.id << " margin=" << c.margin);
    CHECK(c.pass);
  }
  CHECK(res.T0 > 0.0);
  CHECK(res.sup_Du_conclusion <= res.rhs_bound);
}
