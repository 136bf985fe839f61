#include <catch2/catch_amalgamated.hpp>

#include "oblab/qmc.hpp"
#include "oblab/quadrature.hpp"
#include "oblab/rootfind.hpp"

#include <cmath>

using namespace oblab;

TEST_CASE("adaptive quadrature hits smooth integrals") {
  double v = integrate([](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(std::abs(v - 2.0) < 1e-12);
  v = integrate([](double x) { return std::exp(-x); }, 0.0, 40.0);
  CHECK(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("adaptive quadrature resolves a step integrand") {
  auto f = [](double x) { return x < 0.3333 ? 2.0 : 1.0; };
  double v = integrate(f, 0.0, 1.0, {1e-10, 100000});
  CHECK(std::abs(v - (2.0 * 0.3333 + (1.0 - 0.3333))) < 1e-9);
}

TEST_CASE("brent finds simple roots") {
  auto f = [](double x) { return x * x - 2.0; };
  double r = brent(f, 0.0, 2.0);
  CHECK(std::abs(r - std::sqrt(2.0)) < 1e-12);
  r = solve_expanding(f, 5.0, 1.0);
  CHECK(std::abs(std::abs(r) - std::sqrt(2.0)) < 1e-12);
}

TEST_CASE("lattice points are deterministic for a seed") {
  Rank1Lattice a(5, 1024, 42), b(5, 1024, 42), c(5, 1024, 43);
  double pa[5], pb[5], pc[5];
  a.point(17, pa);
  b.point(17, pb);
  c.point(17, pc);
  bool same = true, diff = false;
  for (int j = 0; j < 5; ++j) {
    same = same && pa[j] == pb[j];
    diff = diff || pa[j] != pc[j];
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("lattice integrates a smooth periodic function") {
  // int over [0,1]^3 of prod (1 + sin(2 pi x_j)/2) = 1
  Rank1Lattice lat(3, 1 << 12, 7);
  double sum = 0.0, pt[3];
  for (int i = 0; i < lat.size(); ++i) {
    lat.point(i, pt);
    double f = 1.0;
    for (int j = 0; j < 3; ++j) f *= 1.0 + 0.5 * std::sin(2.0 * M_PI * pt[j]);
    sum += f;
  }
  CHECK(std::abs(sum / lat.size() - 1.0) < 1e-6);
}
