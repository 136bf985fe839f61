#pragma once

#include <functional>

namespace oblab {

// Central difference with one Richardson extrapolation step.
template <class F>
double central_diff(const F& f, double x, double h) {
  double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
  double d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

template <class F>
double central_diff_plain(const F& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <class F>
double second_diff(const F& f, double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// Mixed second derivative d^2 f / (dx dy) via the 4-point cross stencil.
template <class F>
double mixed_diff(const F& f, double x, double y, double hx, double hy) {
  return (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) +
          f(x - hx, y - hy)) /
         (4.0 * hx * hy);
}

inline double rel_step(double x, double base) {
  double s = base * (1.0 + std::abs(x));
  return s;
}

}  // namespace oblab
