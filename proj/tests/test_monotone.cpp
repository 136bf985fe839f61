#include <catch2/catch_amalgamated.hpp>

#include "oblab/monotone.hpp"

#include <cmath>
#include <functional>

using namespace oblab;

namespace {

// Independent oracle: plain adaptive Simpson, nested per stage.  This is
// deliberately not the library's collapsed-kernel evaluation path.
double simpson(const std::function<double(double)>& f, double a, double b,
               double tol, int depth = 0) {
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double left = (m - a) / 6.0 * (fa + 4.0 * f(lm) + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * f(rm) + fb);
  if (depth > 28 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, 0.5 * tol, depth + 1) +
         simpson(f, m, b, 0.5 * tol, depth + 1);
}

double stage_avg(const std::function<double(double)>& f, double x,
                 double tol = 1e-9) {
  if (x <= 0.0) return f(0.0);
  return simpson(f, 0.0, x, tol) / x;
}

ScalarFunction1D dec(std::function<double(double)> f, double L = 0.0) {
  ScalarFunction1D s;
  s.eval = std::move(f);
  s.domain_start = L;
  s.tag = Monotonicity::decreasing;
  return s;
}

ScalarFunction1D inc(std::function<double(double)> f, double L = 0.0) {
  ScalarFunction1D s;
  s.eval = std::move(f);
  s.domain_start = L;
  s.tag = Monotonicity::increasing;
  return s;
}

}  // namespace

TEST_CASE("averaging preserves constants") {
  auto F = iterated_average(dec([](double) { return 5.0; }));
  for (double x : {0.1, 1.0, 7.0, 300.0}) {
    CHECK(F.value(x) == Catch::Approx(5.0).margin(1e-9));
    CHECK(F.derivative(x) == Catch::Approx(0.0).margin(1e-9));
    CHECK(F.second_derivative(x) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("first stage matches the closed form for 1/(1+x)") {
  auto F = iterated_average(dec([](double x) { return 1.0 / (1.0 + x); }));
  for (double x : {0.5, 1.0, 3.0, 20.0})
    CHECK(F.g(x) == Catch::Approx(std::log(1.0 + x) / x).epsilon(1e-9));
}

TEST_CASE("triple average agrees with the nested-quadrature oracle") {
  auto f = [](double x) { return 1.0 / (1.0 + x); };
  auto F = iterated_average(dec(f));
  auto g_o = [&](double y) { return stage_avg(f, y); };
  auto h_o = [&](double y) { return stage_avg(g_o, y); };
  double F1_oracle = stage_avg(h_o, 1.0);
  CHECK(F.value(1.0) == Catch::Approx(F1_oracle).margin(1e-7));
  CHECK(F.h(2.0) == Catch::Approx(h_o(2.0)).margin(1e-7));
}

TEST_CASE("piecewise constant input integrates in closed form") {
  // f = 2 on (0,1), 1 on [1,inf): g(x) = (x+1)/x for x >= 1
  auto F = iterated_average(
      dec([](double x) { return x < 1.0 ? 2.0 : 1.0; }));
  for (double x : {1.0, 2.0, 8.0})
    CHECK(F.g(x) == Catch::Approx((x + 1.0) / x).epsilon(1e-8));
  CHECK(F.g(2.0) > F.g(4.0));  // decreasing
}

TEST_CASE("rejects increasing input") {
  CHECK_THROWS_AS(iterated_average(dec([](double x) { return x; })),
                  NonMonotoneInput);
}

TEST_CASE("star-decreasing inequalities hold for regularized outputs") {
  std::vector<std::function<double(double)>> fns = {
      [](double x) { return 1.0 / (1.0 + x); },
      [](double x) { return std::exp(-x) + 0.5; },
      [](double x) { return x < 2.0 ? 3.0 : (x < 5.0 ? 1.5 : 0.25); },
  };
  for (auto& f : fns) {
    auto F = iterated_average(dec(f));
    SamplePlan1D plan;
    plan.lo = 0.05;
    plan.hi = 200.0;
    plan.n = 120;
    auto rep = star_check(F, plan);
    INFO("worst margin " << rep.worst_margin << " at x=" << rep.worst_x);
    CHECK(rep.pass(1e-7));
    for (double x : logspace(0.05, 200.0, 40)) {
      ScalarFunction1D s = dec(f);
      CHECK(F.value(x) >= s(x) - 1e-8);
    }
  }
}

TEST_CASE("regularization tracks the tail of f") {
  // |F(x) - f(x)| <= osc_tot * delta (ln^2(x/delta) + 2 ln(x/delta) + 2)/(2x)
  //                 + osc_{[delta,inf)} f  with delta = sqrt(x)
  auto f = [](double x) { return 1.0 / (1.0 + x); };
  auto F = iterated_average(dec(f));
  double osc_tot = 1.0;
  for (int k = 3; k <= 9; ++k) {
    double x = std::pow(2.0, k);
    double delta = std::sqrt(x);
    double l = std::log(x / delta);
    double bound =
        osc_tot * delta * (l * l + 2.0 * l + 2.0) / (2.0 * x) + f(delta);
    CHECK(std::abs(F.value(x) - f(x)) <= bound + 1e-8);
  }
}

TEST_CASE("dini regularization of the identity is exact") {
  auto F = dini_regularize(inc([](double x) { return x; }));
  for (double x : {0.01, 0.1, 0.5}) {
    CHECK(F.value(x) == Catch::Approx(x).epsilon(1e-9));
    CHECK(F.g(x) == Catch::Approx(0.5 * x).epsilon(1e-9));
    CHECK(F.h(x) == Catch::Approx(0.25 * x).epsilon(1e-9));
  }
}

TEST_CASE("dini regularization of zero is zero") {
  auto F = dini_regularize(inc([](double) { return 0.0; }));
  CHECK(F.value(0.25) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("dini power law: closed form and the doubling bound") {
  double a = 0.5;
  auto F = dini_regularize(inc([a](double x) { return std::pow(x, a); }));
  for (double x : {0.05, 0.2, 0.6}) {
    double expect = std::pow(2.0, 1.0 + a) * std::pow(x, a) / sqr(1.0 + a);
    CHECK(F.value(x) == Catch::Approx(expect).epsilon(1e-8));
    CHECK(F.value(x) <= 4.0 * std::pow(4.0 * x, a) + 1e-10);  // F <= 4 f(4x)
    CHECK(F.value(x) >= std::pow(x, a) - 1e-10);              // F >= f
  }
}

TEST_CASE("divergent Dini integral is detected") {
  // f(y) = 1/ln(1/y) is increasing on (0, 1/e) but int f/y dy diverges
  CHECK_THROWS_AS(
      dini_regularize(inc(
          [](double y) { return y <= 0.0 ? 0.0 : 1.0 / std::log(1.0 / y); },
          0.0)),
      NotDini);
}

TEST_CASE("star check flags e^{-x} beyond x = 1") {
  auto F = [](double x) { return std::exp(-x); };
  auto dF = [](double x) { return -std::exp(-x); };
  auto d2F = [](double x) { return std::exp(-x); };
  SamplePlan1D inside{0.05, 0.9, 40}, outside{1.5, 50.0, 40};
  CHECK(star_check(F, dF, d2F, inside).pass(1e-9));
  CHECK_FALSE(star_check(F, dF, d2F, outside).pass(1e-9));
}

TEST_CASE("1/x satisfies the star inequalities with equality") {
  auto rep = star_check([](double x) { return 1.0 / x; },
                        [](double x) { return -1.0 / (x * x); },
                        [](double x) { return 2.0 / (x * x * x); });
  CHECK(rep.pass(1e-7));
  for (const auto& e : rep.entries) {
    double scale = 1.0 + 2.0 / (e.x * e.x * e.x);
    CHECK(e.margin_lower_d1 == Catch::Approx(0.0).margin(1e-13 * scale));
    CHECK(e.margin_upper_d2 == Catch::Approx(0.0).margin(1e-13 * scale));
  }
}
