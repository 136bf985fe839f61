#pragma once

#include "oblab/common.hpp"
#include "oblab/quadrature.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

namespace oblab {

enum class Monotonicity { decreasing, increasing };

// A scalar function on (L, inf), extended constant on [0, L].
struct ScalarFunction1D {
  std::function<double(double)> eval;
  double domain_start = 0.0;
  Monotonicity tag = Monotonicity::decreasing;

  double operator()(double x) const {
    return eval(x <= domain_start ? domain_start : x);
  }
};

namespace detail {

// Cheap guard against grossly non-monotone input: sample a log-spaced grid.
inline void check_monotone(const ScalarFunction1D& f, double lo, double hi,
                           double tol = 1e-9) {
  int n = 256;
  double prev = f(lo);
  bool dec = f.tag == Monotonicity::decreasing;
  for (int i = 1; i < n; ++i) {
    double x = lo * std::pow(hi / lo, double(i) / (n - 1));
    double v = f(x);
    double slack = tol * (1.0 + std::abs(prev));
    if (dec ? (v > prev + slack) : (v < prev - slack))
      throw NonMonotoneInput("monotonicity violated near x=" +
                             std::to_string(x));
    prev = v;
  }
}

}  // namespace detail

// Iterated-average regularization.  The three stages are
//   g(x) = (1/x) int_0^x f,   h(x) = (1/x) int_0^x g,   F(x) = (1/x) int_0^x h,
// and collapsing the nesting gives single weighted integrals
//   g(x) = int_0^inf f(x e^-t) e^-t dt,
//   h(x) = int_0^inf f(x e^-t) t e^-t dt,
//   F(x) = (1/2) int_0^inf f(x e^-t) t^2 e^-t dt,
// which is what gets evaluated (one quadrature per stage instead of a
// nested one).  Derivatives come from the stage identities
//   F'(x) = (h(x) - F(x)) / x,
//   h'(x) = (g(x) - h(x)) / x,
//   F''(x) = 2 (F(x) - h(x)) / x^2 + h'(x) / x,
// never from finite differences.
class RegularizedFunction {
 public:
  RegularizedFunction() = default;
  RegularizedFunction(ScalarFunction1D f, QuadratureConfig quad, int stages)
      : f_(std::move(f)), quad_(quad), stages_(stages) {}

  double f(double x) const { return f_(x); }

  double g(double x) const { return weighted_average(x, 0); }
  double h(double x) const { return weighted_average(x, 1); }

  double value(double x) const {
    if (stages_ == 3) return weighted_average(x, 2);
    // Dini variant: F(x) = 2 h(2x).
    return 2.0 * h(2.0 * x);
  }
  double operator()(double x) const { return value(x); }

  double derivative(double x) const {
    if (stages_ == 3) return (h(x) - value(x)) / x;
    // F'(x) = 2 (g(2x) - h(2x)) / x from h'(y) = (g(y)-h(y))/y.
    return 2.0 * (g(2.0 * x) - h(2.0 * x)) / x;
  }

  double second_derivative(double x) const {
    if (stages_ != 3)
      throw Error("second derivative defined for the C^2 construction only");
    double gg = g(x), hh = h(x), FF = weighted_average(x, 2);
    double hp = (gg - hh) / x;
    return 2.0 * (FF - hh) / (x * x) + hp / x;
  }

 private:
  // int_0^inf f(x e^-t) t^k e^-t dt / k!  evaluated adaptively; the constant
  // extension of f below domain_start contributes a closed-form tail.
  double weighted_average(double x, int k) const {
    if (x <= 0.0) return f_(0.0);
    // For t beyond t_cut, x e^-t <= domain_start (or is deep in the constant
    // extension region), where f is exactly constant.
    double L = std::max(f_.domain_start, x * 1e-14);
    double t_cut = std::log(x / L);
    double tail_cut = 45.0;  // weight below 1e-17 afterwards
    double lead = 0.0;
    if (t_cut < tail_cut && t_cut > 0.0) {
      // exact integral of the constant part: f(L) * int_{t_cut}^inf t^k e^-t
      lead = f_(L) * gamma_tail(k, t_cut);
      tail_cut = t_cut;
    } else if (t_cut <= 0.0) {
      return f_(x);
    }
    auto integrand = [&](double t) {
      return f_(x * std::exp(-t)) * std::pow(t, k) * std::exp(-t);
    };
    double core = integrate(integrand, 0.0, tail_cut, quad_);
    double fact = (k == 2) ? 2.0 : 1.0;
    return (core + lead) / fact;
  }

  // int_T^inf t^k e^-t dt for k = 0,1,2.
  static double gamma_tail(int k, double T) {
    double e = std::exp(-T);
    if (k == 0) return e;
    if (k == 1) return e * (T + 1.0);
    return e * (T * T + 2.0 * T + 2.0);
  }

  ScalarFunction1D f_;
  QuadratureConfig quad_;
  int stages_ = 3;
};

// Lemma-style regularization of a bounded positive decreasing function:
// returns F >= f with F *-decreasing and lim F = lim f.
inline RegularizedFunction iterated_average(const ScalarFunction1D& f,
                                            const QuadratureConfig& quad = {}) {
  if (f.tag != Monotonicity::decreasing)
    throw NonMonotoneInput("iterated_average expects a decreasing function");
  double lo = std::max(f.domain_start, 1e-6) * (1.0 + 1e-12);
  detail::check_monotone(f, lo, std::max(1e4, 100.0 * (f.domain_start + 1.0)));
  if (f(lo) < 0.0)
    throw NonMonotoneInput("iterated_average expects a positive function");
  return RegularizedFunction(f, quad, 3);
}

// Dini regularization: F(x) = 2 h(2x) for increasing f with finite Dini
// integral.  Divergence is detected on dyadic lower Riemann sums of
// int f(y)/y dy.
inline RegularizedFunction dini_regularize(const ScalarFunction1D& f,
                                           const QuadratureConfig& quad = {}) {
  if (f.tag != Monotonicity::increasing)
    throw NonMonotoneInput("dini_regularize expects an increasing function");
  double L = 1.0;
  detail::check_monotone(f, 1e-9, L);
  if (f(1e-9) < -1e-12)
    throw NonMonotoneInput("dini_regularize expects a nonnegative function");
  // Lower Riemann sums on a dyadic refinement:
  //   int_{L 2^-k-1}^{L 2^-k} f/y dy >= f(L 2^-k-1) ln 2.
  // Convergence requires the dyadic terms f(L 2^-k) to decay at a
  // geometric rate bounded away from one; a vanishing fitted decay
  // exponent means the partial sums keep growing.
  double partial = 0.0;
  double ln2 = std::log(2.0);
  std::vector<double> terms;
  bool settled = false;
  for (int k = 0; k < 2000; ++k) {
    double y = std::max(L * std::pow(0.5, k + 1), 1e-300);
    double term = f(y) * ln2;
    partial += term;
    terms.push_back(term);
    if (partial > 1e12) throw NotDini("Dini integral diverges numerically");
    if (term < 1e-12) {
      settled = true;
      break;
    }
    if (k >= 64 && k % 16 == 0) {
      double alpha = -std::log2(terms[k] / terms[k - 16]) / 16.0;
      if (alpha < 1e-3)
        throw NotDini("dyadic lower sums grow without bound");
    }
  }
  if (!settled) {
    int k = static_cast<int>(terms.size()) - 1;
    double alpha = -std::log2(terms[k] / terms[k - 16]) / 16.0;
    if (alpha < 1e-3) throw NotDini("dyadic lower sums grow without bound");
  }
  return RegularizedFunction(f, quad, 2);
}

struct SamplePlan1D {
  double lo = 1e-2;
  double hi = 1e4;
  int n = 256;
};

struct StarCheckEntry {
  double x;
  double margin_lower_d1;   // F'(x) - (-F/x)
  double margin_upper_d1;   // 0 - F'(x)
  double margin_lower_d2;   // F''(x) - (-F/x^2)
  double margin_upper_d2;   // 2F/x^2 - F''(x)
};

struct StarCheckReport {
  std::vector<StarCheckEntry> entries;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_x = 0.0;
  bool pass(double tol = 1e-9) const { return worst_margin >= -tol; }
};

// Reports worst-case margins of the *-decreasing inequalities
//   -F/x <= F' <= 0  and  -F/x^2 <= F'' <= 2F/x^2
// for a twice-differentiable F supplied with its derivatives.
inline StarCheckReport star_check(
    const std::function<double(double)>& F,
    const std::function<double(double)>& dF,
    const std::function<double(double)>& d2F, const SamplePlan1D& plan = {}) {
  StarCheckReport rep;
  for (double x : logspace(plan.lo, plan.hi, plan.n)) {
    double v = F(x), d1 = dF(x), d2 = d2F(x);
    StarCheckEntry e;
    e.x = x;
    e.margin_lower_d1 = d1 + v / x;
    e.margin_upper_d1 = -d1;
    e.margin_lower_d2 = d2 + v / (x * x);
    e.margin_upper_d2 = 2.0 * v / (x * x) - d2;
    double m = std::min(std::min(e.margin_lower_d1, e.margin_upper_d1),
                        std::min(e.margin_lower_d2, e.margin_upper_d2));
    if (m < rep.worst_margin) {
      rep.worst_margin = m;
      rep.worst_x = x;
    }
    rep.entries.push_back(e);
  }
  return rep;
}

inline StarCheckReport star_check(const RegularizedFunction& F,
                                  const SamplePlan1D& plan = {}) {
  return star_check([&](double x) { return F.value(x); },
                    [&](double x) { return F.derivative(x); },
                    [&](double x) { return F.second_derivative(x); }, plan);
}

}  // namespace oblab
