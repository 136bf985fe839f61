#pragma once

#include "oblab/common.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace oblab {

struct RootConfig {
  double tol = 1e-13;
  int max_iter = 200;
};

// Brent's method on a sign-changing bracket [a,b].
template <class F>
double brent(const F& f, double a, double b, double fa, double fb,
             const RootConfig& cfg = {}) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw RootNotBracketed("brent: no sign change");
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < cfg.max_iter; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) +
                  0.5 * cfg.tol;
    double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double s = fb / fa, p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        double qq = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q),
                             std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  throw NoConvergence("brent: iteration budget exhausted");
}

template <class F>
double brent(const F& f, double a, double b, const RootConfig& cfg = {}) {
  return brent(f, a, b, f(a), f(b), cfg);
}

// Expands [t0-step, t0+step] geometrically until f changes sign.
template <class F>
double solve_expanding(const F& f, double t0, double step,
                       const RootConfig& cfg = {}, int max_expand = 80) {
  double f0 = f(t0);
  if (f0 == 0.0) return t0;
  double lo = t0, hi = t0, flo = f0, fhi = f0;
  double s = step;
  for (int k = 0; k < max_expand; ++k) {
    lo = t0 - s;
    hi = t0 + s;
    flo = f(lo);
    fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * f0 < 0.0) return brent(f, lo, t0, flo, f0, cfg);
    if (fhi * f0 < 0.0) return brent(f, t0, hi, f0, fhi, cfg);
    s *= 2.0;
  }
  throw RootNotBracketed("solve_expanding: no sign change found");
}

// Newton with a maintained bracket; df may occasionally vanish, in which
// case the step falls back to bisection.  Used where the derivative is
// analytic and the root is known to be simple.
template <class F, class DF>
double newton_bracketed(const F& f, const DF& df, double lo, double hi,
                        double x0, const RootConfig& cfg = {}) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0) throw RootNotBracketed("newton_bracketed");
  double x = std::min(std::max(x0, lo), hi);
  for (int it = 0; it < cfg.max_iter; ++it) {
    double fx = f(x);
    if (std::abs(fx) == 0.0) return x;
    if ((fx > 0) == (fhi > 0)) {
      hi = x;
      fhi = fx;
    } else {
      lo = x;
      flo = fx;
    }
    double d = df(x);
    double xn = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
    if (xn <= lo || xn >= hi) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) < cfg.tol * (1.0 + std::abs(x))) return xn;
    x = xn;
  }
  throw NoConvergence("newton_bracketed: iteration budget exhausted");
}

}  // namespace oblab
