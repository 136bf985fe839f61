#include <catch2/catch_amalgamated.hpp>

#include "oblab/structure.hpp"

using namespace oblab;

namespace {
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

StatePoint mk(double px, double py, double z = 0.0) {
  return StatePoint(v2(0.9, 0.0), z, v2(px, py), 0.0);
}
}  // namespace

TEST_CASE("false mean curvature coefficients") {
  FmceEq eq;
  auto s = mk(1.0, 2.0);
  double p2 = 5.0;
  CHECK(eq.E(s) == Catch::Approx(p2 + p2 * p2));
  CHECK(eq.Lambda(s) == Catch::Approx(1.0 + p2));
  CHECK(eq.lambda_min(s) == Catch::Approx(1.0));
  // delta_1 a^{ij} = 2 p_i p_j exactly
  Mat d1 = eq.delta1_aij(s);
  CHECK((d1 - 2.0 * s.p * s.p.transpose()).norm() < 1e-12);
}

TEST_CASE("identity equation is trivially elliptic") {
  UniformlyEllipticEq eq;
  auto s = mk(3.0, -4.0);
  CHECK(eq.E(s) == Catch::Approx(25.0));
  CHECK(eq.Lambda(s) == Catch::Approx(1.0));
}

TEST_CASE("catalog jets match finite differences") {
  auto check = [](const EquationCoefficients& eq, const StatePoint& s) {
    auto analytic = eq.aij_p(s);
    double h = 1e-6 * (1.0 + s.p.norm());
    for (int k = 0; k < s.dim(); ++k) {
      StatePoint sp = s, sm = s;
      sp.p[k] += h;
      sm.p[k] -= h;
      Mat fd = (eq.aij(sp) - eq.aij(sm)) / (2.0 * h);
      CHECK((analytic[k] - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
    }
  };
  check(FmceEq{}, mk(1.2, -0.7));
  check(CapillaryParabolicEq([](double v) { return std::pow(v, -2.0); },
                             [](double v) { return -2.0 * std::pow(v, -3.0); },
                             ScalarField::constant(0.1)),
        mk(0.8, 1.5));
  check(GeneralizedFmceEq([](double v) { return std::exp(-v * v); },
                          [](double v) { return -2.0 * v * std::exp(-v * v); },
                          [](double v) { return v; },
                          [](double) { return 1.0; }),
        mk(0.5, 0.9));
}

TEST_CASE("capillary-parabolic h1 hypothesis") {
  // sigma^Q passes for Q = 0 or Q <= -2, fails for Q = -1
  auto mkh = [](double Q) {
    return std::pair<std::function<double(double)>,
                     std::function<double(double)>>(
        [Q](double s) { return std::pow(s, Q); },
        [Q](double s) { return Q * std::pow(s, Q - 1.0); });
  };
  {
    auto [h, dh] = mkh(-2.0);
    CHECK_NOTHROW(check_h1_growth(h, dh));
  }
  {
    auto [h, dh] = mkh(0.0);
    CHECK_NOTHROW(check_h1_growth(h, dh));
  }
  {
    auto [h, dh] = mkh(-1.0);
    CHECK_THROWS_AS(check_h1_growth(h, dh), HypothesisViolation);
  }
}

TEST_CASE("A, B', C values for the power source") {
  // fmce, a = |p|^q, r = -3, s = 0
  auto mult = Multipliers::constants(-3.0, 0.0);

  SECTION("C = 0: the source has no x, z dependence") {
    FmceEq eq(std::make_shared<PowerScalar>(1.0, 2.0));
    auto s = mk(1.0, 2.0);
    Vec nu1 = s.p;  // any nondegenerate direction
    auto f = abc_values(eq, s, mult, nu1);
    CHECK(f.C == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("B' at |p| = 10, q = 3.5 is about 0.1566") {
    FmceEq eq(std::make_shared<PowerScalar>(1.0, 3.5));
    StatePoint s = mk(10.0, 0.0);
    auto f = abc_values(eq, s, mult, s.p);
    double expect = 0.5 * std::pow(10.0, 3.5) / (100.0 + 1e4);
    CHECK(f.Bprime == Catch::Approx(expect).epsilon(1e-10));
    CHECK(expect == Catch::Approx(0.1566).margin(2e-4));
  }
  SECTION("uniformly elliptic with a = 0, r = -1: A = 1 for all p") {
    UniformlyEllipticEq eq;
    auto m2 = Multipliers::constants(-1.0, 0.0);
    for (double r : {2.0, 7.0, 31.0}) {
      StatePoint s = mk(r, 0.5 * r);
      auto f = abc_values(eq, s, m2, s.p);
      CHECK(f.A == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("eta = p tensor p recovers the delta_1 E identity") {
  // (delta_1 + r) E = (delta_1 + r + 1) a^{ij} eta_ij + E  at eta = p p^T
  FmceEq eq(std::make_shared<PowerScalar>(1.0, 3.0));
  auto mult = Multipliers::constants(-3.0, 0.0);
  for (double r : {1.5, 4.0, 20.0}) {
    StatePoint s = mk(r, -0.3 * r, 0.1);
    Mat eta = s.p * s.p.transpose();
    double lhs = s.p.dot(eq.E_p(s)) + mult.r(s) * eq.E(s);
    Mat d1a = eq.delta1_aij(s);
    double contr =
        ((d1a + (mult.r(s) + 1.0) * eq.aij(s)).array() * eta.array()).sum();
    CHECK(lhs == Catch::Approx(contr + eq.E(s)).epsilon(1e-12));
  }
}

TEST_CASE("limit estimates reproduce the catalog tails") {
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::constant(0.0));
  auto mult = Multipliers::constants(-3.0, 0.0);
  LimitPlan plan;
  plan.n_dir = 6;
  plan.n_x = 4;
  plan.n_z = 1;

  SECTION("q = 3.5 decays to zero") {
    FmceEq eq(std::make_shared<PowerScalar>(1.0, 3.5));
    auto est = limit_estimates(eq, bc, dom, plan, mult, {1e-3});
    const auto& bp = est.Bprime.at(fmt_g(1e-3));
    CHECK(bp.verdict == TailVerdict::converges_to_zero);
    const auto& c = est.C.at(fmt_g(1e-3));
    CHECK(c.converges());
    CHECK(c.limit <= 1e-9);
  }
  SECTION("q = 4 stabilizes at 1") {
    FmceEq eq(std::make_shared<PowerScalar>(1.0, 4.0));
    auto est = limit_estimates(eq, bc, dom, plan, mult, {1e-3});
    const auto& bp = est.Bprime.at(fmt_g(1e-3));
    CHECK(bp.verdict == TailVerdict::stabilized);
    CHECK(bp.sups.back() >= 0.9);
  }
  SECTION("a = 0 kills B and C") {
    FmceEq eq;
    auto est = limit_estimates(eq, bc, dom, plan, mult, {1e-3});
    CHECK(est.Bprime.at(fmt_g(1e-3)).limit == Catch::Approx(0.0).margin(1e-12));
    CHECK(est.C.at(fmt_g(1e-3)).limit == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("classification: fmce catalog verdicts") {
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::inverse(), ScalarField::affine_z(0.3, -0.02));
  auto cst = boundary_constants(bc, dom, SamplePlan{});
  StructurePlan plan;
  plan.n_dir = 4;
  plan.n_eta = 4;
  plan.n_x = 3;
  plan.n_z = 2;
  LimitPlan lplan;
  lplan.n_dir = 6;
  lplan.n_x = 3;
  lplan.n_z = 2;

  SECTION("q = 3.5 is admissible via the global route") {
    FmceEq eq(std::make_shared<PowerScalar>(1.0, 3.5));
    auto cls = classify_structure(eq, bc, dom, cst, plan, lplan, {1e-3});
    INFO("verdict " << cls.verdict);
    for (auto& r : cls.reasons) INFO("reason " << r);
    CHECK(cls.verdict == "Thm 5.1");
  }
  SECTION("q = 4 is rejected with the B' reason") {
    FmceEq eq(std::make_shared<PowerScalar>(1.0, 4.0));
    auto cls = classify_structure(eq, bc, dom, cst, plan, lplan, {1e-3});
    CHECK(cls.verdict == "none");
    bool has_reason = false;
    for (const auto& r : cls.reasons)
      has_reason = has_reason || r.find("B'") != std::string::npos;
    CHECK(has_reason);
  }
}

TEST_CASE("uniformly elliptic catalog: theta=1, r=-1, s=0 conditions") {
  Domain dom = Domain::disk(1.0);
  CapillaryBC bc(HFunction::constant(1.0), ScalarField::constant(0.2));
  auto cst = boundary_constants(bc, dom, SamplePlan{});
  UniformlyEllipticEq eq;
  StructurePlan plan;
  plan.n_dir = 4;
  plan.n_eta = 4;
  plan.n_x = 3;
  plan.n_z = 2;
  auto rep = uniformly_elliptic_conditions(eq, bc, dom, cst, plan);
  for (const auto& r : rep.results) {
    INFO(r.id);
    CHECK(r.pass);
  }
}

TEST_CASE("A, B', C are invariant under common positive rescaling") {
  struct Scaled : FmceEq {
    double fac;
    explicit Scaled(double f)
        : FmceEq(std::make_shared<PowerScalar>(f, 3.5)), fac(f) {}
    Mat aij(const StatePoint& s) const override {
      return fac * FmceEq::aij(s);
    }
    std::vector<Mat> aij_p(const StatePoint& s) const override {
      auto v = FmceEq::aij_p(s);
      for (auto& m : v) m *= fac;
      return v;
    }
  };
  auto mult = Multipliers::constants(-3.0, 0.0);
  Scaled eq1(1.0), eq5(5.0);
  StatePoint s = mk(20.0, 5.0);
  auto f1 = abc_values(eq1, s, mult, s.p);
  auto f5 = abc_values(eq5, s, mult, s.p);
  CHECK(f1.A == Catch::Approx(f5.A).epsilon(1e-12));
  CHECK(f1.Bprime == Catch::Approx(f5.Bprime).epsilon(1e-12));
  CHECK(f1.C == Catch::Approx(f5.C).margin(1e-14));
}

TEST_CASE("degenerate delta_2 denominator is reported") {
  FmceEq eq(std::make_shared<PowerScalar>(1.0, 2.0));
  StatePoint s = mk(1.0, 0.0);
  Vec nu1 = v2(0.0, 1.0);  // orthogonal to p
  auto mult = Multipliers::constants(-3.0, 0.0);
  CHECK_THROWS_AS(abc_values(eq, s, mult, nu1), DegenerateDenominator);
}
