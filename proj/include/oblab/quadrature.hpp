#pragma once

#include "oblab/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oblab {

struct QuadratureConfig {
  double abs_tol = 1e-10;
  int max_panels = 20000;
};

namespace detail {

// Gauss-Kronrod 7-15 pair on [-1,1] (QUADPACK constants).
inline const double gk_nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline const double gk_wk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline const double gk_wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

struct PanelResult {
  double kronrod;
  double error;
};

template <class F>
PanelResult gk15(const F& f, double a, double b) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double resk = gk_wk[7] * fc;
  double resg = gk_wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    double x = h * gk_nodes[j];
    double f1 = f(c - x), f2 = f(c + x);
    resk += gk_wk[j] * (f1 + f2);
    if (j % 2 == 1) resg += gk_wg[j / 2] * (f1 + f2);
  }
  resk *= h;
  resg *= h;
  return {resk, std::abs(resk - resg)};
}

}  // namespace detail

// Composite Gauss-Legendre/Kronrod with adaptive bisection, absolute
// tolerance.  Throws QuadratureFailure when the panel budget is exhausted.
template <class F>
double integrate(const F& f, double a, double b,
                 const QuadratureConfig& cfg = {}) {
  if (a == b) return 0.0;
  struct Panel {
    double a, b, value, error;
  };
  auto first = detail::gk15(f, a, b);
  std::vector<Panel> panels{{a, b, first.kronrod, first.error}};
  double total_err = first.error;
  int used = 1;
  while (total_err > cfg.abs_tol) {
    // bisect the worst panel
    std::size_t worst = 0;
    for (std::size_t i = 1; i < panels.size(); ++i)
      if (panels[i].error > panels[worst].error) worst = i;
    Panel p = panels[worst];
    if (used >= cfg.max_panels || p.b - p.a < 1e-15 * (std::abs(p.a) + 1.0)) {
      if (total_err > 100.0 * cfg.abs_tol)
        throw QuadratureFailure("adaptive refinement exceeded budget");
      break;  // accept with slightly degraded tolerance
    }
    double m = 0.5 * (p.a + p.b);
    auto l = detail::gk15(f, p.a, m);
    auto r = detail::gk15(f, m, p.b);
    total_err += l.error + r.error - p.error;
    panels[worst] = {p.a, m, l.kronrod, l.error};
    panels.push_back({m, p.b, r.kronrod, r.error});
    ++used;
  }
  double sum = 0.0;
  for (const auto& p : panels) sum += p.value;
  return sum;
}

}  // namespace oblab
