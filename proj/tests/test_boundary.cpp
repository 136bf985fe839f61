#include <catch2/catch_amalgamated.hpp>

#include "oblab/boundary.hpp"
#include "oblab/nfun.hpp"

#include <memory>

using namespace oblab;

namespace {
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("Neumann-type capillary reduces to p.gamma / v") {
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.0));
  Vec x = v2(0.8, 0.0);
  auto gj = dom.geometry_jet(x);
  StatePoint s(x, 0.0, (2.0 * gj.gamma).eval(), 0.0);
  double v = std::sqrt(5.0);
  CHECK(bc.value(dom, gj, s) == Catch::Approx(2.0 / v));
}

TEST_CASE("capillary jet matches hand differentiation at p = 2 gamma") {
  // b_p.gamma = h(v) + h'(v)(p.gamma)^2/v = 1/(5 sqrt 5) for h = 1/sigma
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.0));
  Vec x = v2(0.8, 0.0);
  auto gj = dom.geometry_jet(x);
  StatePoint s(x, 0.0, (2.0 * gj.gamma).eval(), 0.0);
  auto j = bc.jet(dom, gj, s);
  CHECK(j.value == Catch::Approx(2.0 / std::sqrt(5.0)));
  CHECK(j.dp.dot(gj.gamma) == Catch::Approx(1.0 / (5.0 * std::sqrt(5.0))));
}

TEST_CASE("catalog jets agree with finite differences") {
  Domain dom = Domain::disk(1.0);
  auto check_jets = [&](const BoundaryCondition& bc) {
    Vec x = v2(0.7, 0.2);
    auto gj = dom.geometry_jet(x);
    StatePoint s(x, 0.3, v2(1.2, -0.7), 0.0);
    auto analytic = bc.jet(dom, gj, s);
    // generic FD path from the base class
    struct Wrap : BoundaryCondition {
      const BoundaryCondition* inner;
      std::string family() const override { return "wrap"; }
      double value(const Domain& d, const GeometryJet& g,
                   const StatePoint& st) const override {
        return inner->value(d, g, st);
      }
    } wrap;
    wrap.inner = &bc;
    auto fd = wrap.jet(dom, gj, s);
    CHECK(analytic.value == Catch::Approx(fd.value).margin(1e-12));
    CHECK((analytic.dp - fd.dp).norm() <=
          1e-6 * (1.0 + analytic.dp.norm()));
    CHECK((analytic.dx - fd.dx).norm() <=
          1e-5 * (1.0 + analytic.dx.norm()));
    CHECK(analytic.dz == Catch::Approx(fd.dz).margin(1e-6));
  };

  SECTION("capillary") {
    CapillaryBC bc(HFunction::inverse(), ScalarField::affine_z(0.3, -0.05));
    check_jets(bc);
  }
  SECTION("power") {
    ScalarField psi = ScalarField::constant(0.2);
    PowerBC bc([](const Vec& x) { return 0.5 + 0.2 * x[0]; },
               [](const Vec& x) { return v2(0.2, 0.0); }, psi);
    check_jets(bc);
  }
  SECTION("anisotropic") {
    AnisotropicBC bc(
        HFunction::inverse(),
        [](const Vec& x, double) {
          Mat B = Mat::Identity(2, 2);
          B(0, 0) += 0.2 * x[0];
          return B;
        },
        ScalarField::constant(0.25));
    check_jets(bc);
  }
  SECTION("nonvariational") {
    NonvariationalBC bc(
        HFunction::power(-0.5),
        [](const Vec& x, double) {
          Vec b = -x / x.norm();  // = gamma on the disk boundary ray
          b[0] += 0.3;
          b.normalize();
          return b;
        },
        0.9, ScalarField::constant(0.2));
    check_jets(bc);
  }
}

TEST_CASE("capillary with sup|psi| = 1 violates the limit hypothesis") {
  CHECK_THROWS_AS(check_h_capillary(HFunction::inverse(), 1.0),
                  HypothesisViolation);
  CHECK_NOTHROW(check_h_capillary(HFunction::inverse(), 0.5));
}

TEST_CASE("closed-form capillary constants") {
  Domain dom = Domain::disk(1.0);
  SamplePlan plan;

  SECTION("psi = 0: Psi = 1, beta0 = 1, c0 = 0") {
    CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.0));
    auto cst = boundary_constants(bc, dom, plan);
    CHECK(cst.Psi == Catch::Approx(1.0));
    CHECK(cst.beta0 == Catch::Approx(1.0));
    CHECK(cst.c0 == Catch::Approx(0.0).margin(1e-14));
  }
  SECTION("sup|psi| = 1/2: Psi = 3/4, c0 = 1/sqrt(3), beta0 = 4/3") {
    CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.5));
    auto cst = boundary_constants(bc, dom, plan);
    CHECK(cst.Psi == Catch::Approx(0.75));
    CHECK(cst.c0 == Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(cst.beta0 == Catch::Approx(4.0 / 3.0));
  }
}

TEST_CASE("closed-form constants track sampled suprema") {
  // modest datum so the conservative closed forms stay within 10%
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.3));
  SamplePlan plan;
  plan.radii = {5.0, 50.0, 500.0};
  auto cst = boundary_constants(bc, dom, plan);
  double samp_beta0 = 0.0, samp_c0 = 0.0, samp_psi = 1e30;
  for (const auto& rec : sample_sigma0(bc, dom, plan, cst.tau0)) {
    double bg = rec.bjet.dp.dot(rec.gj.gamma);
    double hv = 1.0 / rec.v;
    samp_beta0 = std::max(samp_beta0, rec.bjet.dp.norm() / bg);
    samp_c0 = std::max(samp_c0, std::abs(rec.p_normal) / rec.v_prime);
    samp_psi = std::min(samp_psi, bg / hv);
  }
  CHECK(samp_beta0 <= cst.beta0 * 1.001);
  CHECK(cst.beta0 <= samp_beta0 * 1.10);
  CHECK(samp_c0 <= cst.c0 * 1.001);
  CHECK(cst.c0 <= samp_c0 * 1.10);
  CHECK(samp_psi >= cst.Psi - 1e-9);
  CHECK(cst.Psi >= samp_psi * 0.90);
}

TEST_CASE("power family eps_x has the ln(sigma)/sigma shape") {
  Domain dom = Domain::disk(1.0);
  ScalarField psi;
  psi.value = [](const Vec& x, double, double) { return 0.2 * x[0]; };
  PowerBC bc([](const Vec& x) { return 0.3 + 0.1 * x[1]; },
             [](const Vec&) { return v2(0.0, 0.1); }, psi);
  SamplePlan plan;
  plan.radii = {5.0, 50.0, 500.0};
  auto cst = boundary_constants(bc, dom, plan);
  CHECK(cst.eps_x_K > 0.0);
  // certified majorant dominates the raw shape and is *-decreasing
  for (double s : {3.0, 10.0, 100.0})
    CHECK(cst.eps_x(s) >= cst.eps_x_raw(s) - 1e-12);
  auto rep = star_check(cst.eps_x, SamplePlan1D{3.0, 1e4, 64});
  CHECK(rep.pass(1e-7));
}

TEST_CASE("nonvariational obliqueness lower bound") {
  // b_p.gamma >= (beta_*/2) h(v) for large v
  Domain dom = Domain::disk(1.0);
  double beta_star = 0.9;
  NonvariationalBC bc(
      HFunction::power(-0.5),
      [](const Vec& x, double) {
        Vec b = -x / x.norm();
        b[0] += 0.25;
        b.normalize();
        return b;
      },
      beta_star, ScalarField::constant(0.2));
  check_h_nonvariational(bc.h(), beta_star);
  SamplePlan plan;
  plan.radii = {20.0, 200.0};
  auto states = sample_sigma0(bc, dom, plan, 10.0);
  REQUIRE(!states.empty());
  for (const auto& rec : states) {
    double bg = rec.bjet.dp.dot(rec.gj.gamma);
    double hv = std::pow(rec.v, -0.5);
    CHECK(bg >= 0.5 * beta_star * hv - 1e-10);
  }
}

TEST_CASE("boundary condition audit on the pure normal condition") {
  // b = p.gamma: delta_1 b = p.gamma..., all structure conditions hold
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::constant(1.0), ScalarField::constant(0.0));
  auto cst = boundary_constants(bc, dom, SamplePlan{});
  SamplePlan plan;
  auto rep = boundary_condition_audit(
      bc, dom, cst, {"E10.32", "E10.33a", "E10.33b", "E10.35a", "E10.35b"},
      plan);
  for (const auto& r : rep.results) {
    INFO(r.id << " margin " << r.margin);
    CHECK(r.pass);
  }
}

TEST_CASE("capillary delta_1 b <= 0 when psi >= 0") {
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.4));
  SamplePlan plan;
  for (const auto& rec : sample_sigma0(bc, dom, plan, 1.0))
    CHECK(delta1_b(rec.bjet, rec.state) <= 1e-10);
}

TEST_CASE("power family: b_z over b_p.gamma decays when q > -1") {
  Domain dom = Domain::disk(1.0);
  ScalarField psi = ScalarField::affine_z(0.2, 0.1);
  PowerBC bc([](const Vec&) { return 0.5; }, {}, psi);
  auto cst = boundary_constants(bc, dom, SamplePlan{});
  SamplePlan plan;
  plan.radii = {10.0, 100.0, 1000.0};
  auto rep = boundary_condition_audit(bc, dom, cst, {"Elimbz"}, plan);
  auto* r = rep.find("Elimbz");
  REQUIRE(r);
  CHECK(r->pass);
}
