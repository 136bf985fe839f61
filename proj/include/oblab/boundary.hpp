#pragma once

#include "oblab/common.hpp"
#include "oblab/geometry.hpp"
#include "oblab/monotone.hpp"
#include "oblab/report.hpp"
#include "oblab/rootfind.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oblab {

// ---------------------------------------------------------------------------
// building blocks shared by the boundary families

// scalar datum psi(x, z, t) with optional analytic partials (FD fallback)
struct ScalarField {
  std::function<double(const Vec&, double, double)> value;
  std::function<Vec(const Vec&, double, double)> dx;
  std::function<double(const Vec&, double, double)> dz;
  std::function<double(const Vec&, double, double)> dt;

  double operator()(const Vec& x, double z, double t = 0.0) const {
    return value(x, z, t);
  }
  Vec grad_x(const Vec& x, double z, double t = 0.0) const {
    if (dx) return dx(x, z, t);
    int n = static_cast<int>(x.size());
    Vec g(n);
    double h = 1e-6 * (1.0 + x.norm());
    for (int i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (value(xp, z, t) - value(xm, z, t)) / (2.0 * h);
    }
    return g;
  }
  double grad_z(const Vec& x, double z, double t = 0.0) const {
    if (dz) return dz(x, z, t);
    double h = 1e-6 * (1.0 + std::abs(z));
    return (value(x, z + h, t) - value(x, z - h, t)) / (2.0 * h);
  }
  double grad_t(const Vec& x, double z, double t = 0.0) const {
    if (dt) return dt(x, z, t);
    double h = 1e-6 * (1.0 + std::abs(t));
    return (value(x, z + 0.0, t + h) - value(x, z, t - h)) / (2.0 * h);
  }

  static ScalarField constant(double c) {
    ScalarField f;
    f.value = [c](const Vec&, double, double) { return c; };
    f.dx = [c](const Vec& x, double, double) {
      return Vec::Zero(x.size()).eval();
    };
    f.dz = [](const Vec&, double, double) { return 0.0; };
    f.dt = [](const Vec&, double, double) { return 0.0; };
    return f;
  }
  // c0 + cz * z (the z slope must respect family hypotheses)
  static ScalarField affine_z(double c0, double cz) {
    ScalarField f;
    f.value = [c0, cz](const Vec&, double z, double) { return c0 + cz * z; };
    f.dx = [](const Vec& x, double, double) {
      return Vec::Zero(x.size()).eval();
    };
    f.dz = [cz](const Vec&, double, double) { return cz; };
    f.dt = [](const Vec&, double, double) { return 0.0; };
    return f;
  }
};

// gradient-magnitude factor h(sigma) on [1, inf) with analytic derivative
struct HFunction {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
  std::string name;

  double operator()(double s) const { return value(s); }

  static HFunction inverse() {
    HFunction h;
    h.value = [](double s) { return 1.0 / s; };
    h.deriv = [](double s) { return -1.0 / (s * s); };
    h.name = "inverse";
    return h;
  }
  static HFunction constant(double c = 1.0) {
    HFunction h;
    h.value = [c](double) { return c; };
    h.deriv = [](double) { return 0.0; };
    h.name = "constant";
    return h;
  }
  // h(sigma) = sigma^e
  static HFunction power(double e) {
    HFunction h;
    h.value = [e](double s) { return std::pow(s, e); };
    h.deriv = [e](double s) { return e * std::pow(s, e - 1.0); };
    h.name = "power";
    return h;
  }
};

// Newton on a monotone-increasing line evaluator; the tails of b along the
// normal line can be flat, so oversized steps fall back to a bracketed solve.
template <class F, class DF>
double monotone_line_root(const F& f, const DF& df, double guess,
                          double scale) {
  double s = guess;
  for (int it = 0; it < 50; ++it) {
    double fv = f(s);
    double d = df(s);
    if (d <= 0.0) break;
    double step = fv / d;
    if (!std::isfinite(step) || std::abs(step) > 8.0 * scale) break;
    s -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(s))) return s;
  }
  return solve_expanding(f, guess, scale, RootConfig{1e-14, 200});
}

struct SamplePlan {
  int n_boundary = 16;
  int n_z = 5;
  int n_dir = 8;
  double z_range = 2.0;
  std::vector<double> radii = {2.0, 10.0, 100.0, 1000.0};
  std::uint64_t seed = 1;
  double t_max = 0.0;
  int n_t = 1;
};

// ---------------------------------------------------------------------------
// family interface

class BoundaryCondition {
 public:
  virtual ~BoundaryCondition() = default;
  virtual std::string family() const = 0;
  virtual bool time_dependent() const { return false; }

  virtual double value(const Domain& dom, const GeometryJet& gj,
                       const StatePoint& s) const = 0;
  double value(const Domain& dom, const StatePoint& s) const {
    return value(dom, dom.geometry_jet(s.x), s);
  }

  // b, b_p, b_z, b_x (b_t) at a state; catalog families override with
  // analytic formulas, the default falls back to differences.
  virtual FunctionJet jet(const Domain& dom, const GeometryJet& gj,
                          const StatePoint& s) const {
    return fd_jet(dom, gj, s);
  }
  FunctionJet jet(const Domain& dom, const StatePoint& s) const {
    return jet(dom, dom.geometry_jet(s.x), s);
  }

  // evaluator of s -> b(x, z, p_tan + s*gamma) with per-line data cached
  struct Line {
    std::function<double(double)> value;
    std::function<double(double)> deriv;  // = b_p . gamma along the line
  };

  // Root of b = 0 along p = p_tan + s gamma, allocation-light; catalog
  // families override with a monotone Newton iteration.
  virtual double solve_on_line(const Domain& dom, const Vec& gamma,
                               const Vec& x, double z, const Vec& p_tan,
                               double pt2, double t, double guess) const {
    GeometryJet gj;
    gj.gamma = gamma;
    auto ln = normal_line(dom, gj, x, z, p_tan, t);
    return solve_expanding(ln.value, guess, 1.0 + std::sqrt(pt2),
                           RootConfig{1e-14, 200});
  }
  virtual Line normal_line(const Domain& dom, const GeometryJet& gj,
                           const Vec& x, double z, const Vec& p_tan,
                           double t) const {
    auto self = this;
    Line ln;
    ln.value = [self, &dom, gj, x, z, p_tan, t](double s) {
      StatePoint st(x, z, p_tan + s * gj.gamma, t);
      return self->value(dom, gj, st);
    };
    ln.deriv = [ln](double s) {
      double h = 1e-6 * (1.0 + std::abs(s));
      return (ln.value(s + h) - ln.value(s - h)) / (2.0 * h);
    };
    return ln;
  }

 protected:
  FunctionJet fd_jet(const Domain& dom, const GeometryJet& gj,
                     const StatePoint& s) const {
    FunctionJet j;
    j.value = value(dom, gj, s);
    int n = s.dim();
    j.dx = Vec(n);
    j.dp = Vec(n);
    for (int i = 0; i < n; ++i) {
      double hx = 1e-6 * (1.0 + s.x.norm());
      StatePoint sp = s, sm = s;
      sp.x[i] += hx;
      sm.x[i] -= hx;
      j.dx[i] = (value(dom, sp) - value(dom, sm)) / (2.0 * hx);
      double hp = 1e-6 * (1.0 + s.p.norm());
      sp = s;
      sm = s;
      sp.p[i] += hp;
      sm.p[i] -= hp;
      j.dp[i] = (value(dom, gj, sp) - value(dom, gj, sm)) / (2.0 * hp);
    }
    double hz = 1e-6 * (1.0 + std::abs(s.z));
    StatePoint sp = s, sm = s;
    sp.z += hz;
    sm.z -= hz;
    j.dz = (value(dom, gj, sp) - value(dom, gj, sm)) / (2.0 * hz);
    if (time_dependent()) {
      double ht = 1e-6 * (1.0 + std::abs(s.t));
      sp = s;
      sm = s;
      sp.t += ht;
      sm.t -= ht;
      j.dt = (value(dom, gj, sp) - value(dom, gj, sm)) / (2.0 * ht);
    }
    return j;
  }
};

// b = h(v) p.gamma + psi(x,z)
class CapillaryBC : public BoundaryCondition {
 public:
  CapillaryBC(HFunction h, ScalarField psi) : h_(std::move(h)), psi_(std::move(psi)) {}
  std::string family() const override { return "capillary"; }
  const HFunction& h() const { return h_; }
  const ScalarField& psi() const { return psi_; }

  double value(const Domain&, const GeometryJet& gj,
               const StatePoint& s) const override {
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    return h_(v) * s.p.dot(gj.gamma) + psi_(s.x, s.z, s.t);
  }

  FunctionJet jet(const Domain&, const GeometryJet& gj,
                  const StatePoint& s) const override {
    FunctionJet j;
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    double pg = s.p.dot(gj.gamma);
    double hv = h_(v), hp = h_.deriv(v);
    j.value = hv * pg + psi_(s.x, s.z, s.t);
    j.dp = hv * gj.gamma + hp * pg * s.p / v;
    j.dz = psi_.grad_z(s.x, s.z, s.t);
    // x-dependence enters through gamma(x): d/dx_i (p.gamma) = D_i gamma^k p_k
    j.dx = hv * gj.xi_tilde(s.p) + psi_.grad_x(s.x, s.z, s.t);
    j.dt = psi_.grad_t(s.x, s.z, s.t);
    return j;
  }

  Line normal_line(const Domain&, const GeometryJet&, const Vec& x, double z,
                   const Vec& p_tan, double t) const override {
    double pt2 = p_tan.squaredNorm();
    double psi_val = psi_(x, z, t);
    const HFunction h = h_;
    Line ln;
    ln.value = [h, pt2, psi_val](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h.value(v) * s + psi_val;
    };
    ln.deriv = [h, pt2](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h.value(v) + h.deriv(v) * s * s / v;
    };
    return ln;
  }

  double solve_on_line(const Domain&, const Vec&, const Vec& x, double z,
                       const Vec&, double pt2, double t,
                       double guess) const override {
    double psi_val = psi_(x, z, t);
    auto f = [this, pt2, psi_val](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h_.value(v) * s + psi_val;
    };
    auto d = [this, pt2](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h_.value(v) + h_.deriv(v) * s * s / v;
    };
    return monotone_line_root(f, d, guess, 1.0 + std::sqrt(pt2));
  }

 private:
  HFunction h_;
  ScalarField psi_;
};

// b = v^{q(x)} p.gamma + psi(x,z)
class PowerBC : public BoundaryCondition {
 public:
  PowerBC(std::function<double(const Vec&)> q,
          std::function<Vec(const Vec&)> dq, ScalarField psi)
      : q_(std::move(q)), dq_(std::move(dq)), psi_(std::move(psi)) {}
  std::string family() const override { return "power"; }
  const ScalarField& psi() const { return psi_; }
  double q(const Vec& x) const { return q_(x); }

  double value(const Domain&, const GeometryJet& gj,
               const StatePoint& s) const override {
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    return std::pow(v, q_(s.x)) * s.p.dot(gj.gamma) + psi_(s.x, s.z, s.t);
  }

  FunctionJet jet(const Domain&, const GeometryJet& gj,
                  const StatePoint& s) const override {
    FunctionJet j;
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    double pg = s.p.dot(gj.gamma);
    double q = q_(s.x);
    double vq = std::pow(v, q);
    j.value = vq * pg + psi_(s.x, s.z, s.t);
    j.dp = vq * gj.gamma + q * std::pow(v, q - 2.0) * pg * s.p;
    j.dz = psi_.grad_z(s.x, s.z, s.t);
    Vec dq = dq_ ? dq_(s.x) : Vec::Zero(s.dim());
    j.dx = vq * std::log(v) * pg * dq + vq * gj.xi_tilde(s.p) +
           psi_.grad_x(s.x, s.z, s.t);
    j.dt = psi_.grad_t(s.x, s.z, s.t);
    return j;
  }

  Line normal_line(const Domain&, const GeometryJet&, const Vec& x, double z,
                   const Vec& p_tan, double t) const override {
    double pt2 = p_tan.squaredNorm();
    double psi_val = psi_(x, z, t);
    double q = q_(x);
    Line ln;
    ln.value = [q, pt2, psi_val](double s) {
      double v2 = 1.0 + pt2 + s * s;
      return std::pow(v2, 0.5 * q) * s + psi_val;
    };
    ln.deriv = [q, pt2](double s) {
      double v2 = 1.0 + pt2 + s * s;
      return std::pow(v2, 0.5 * q) * (1.0 + q * s * s / v2);
    };
    return ln;
  }

  double solve_on_line(const Domain&, const Vec&, const Vec& x, double z,
                       const Vec&, double pt2, double t,
                       double guess) const override {
    double psi_val = psi_(x, z, t);
    double q = q_(x);
    auto f = [q, pt2, psi_val](double s) {
      double v2 = 1.0 + pt2 + s * s;
      return std::pow(v2, 0.5 * q) * s + psi_val;
    };
    auto d = [q, pt2](double s) {
      double v2 = 1.0 + pt2 + s * s;
      return std::pow(v2, 0.5 * q) * (1.0 + q * s * s / v2);
    };
    return monotone_line_root(f, d, guess, 1.0 + std::sqrt(pt2));
  }

 private:
  std::function<double(const Vec&)> q_;
  std::function<Vec(const Vec&)> dq_;
  ScalarField psi_;
};

// b = h(vt) beta^{ij}(x,z) p_i gamma_j + psi,  vt = (1 + beta^{ij} p_i p_j)^{1/2}
class AnisotropicBC : public BoundaryCondition {
 public:
  using MatrixField = std::function<Mat(const Vec&, double)>;
  AnisotropicBC(HFunction h, MatrixField B, ScalarField psi)
      : h_(std::move(h)), B_(std::move(B)), psi_(std::move(psi)) {}
  std::string family() const override { return "anisotropic"; }
  const HFunction& h() const { return h_; }
  Mat B(const Vec& x, double z) const { return B_(x, z); }
  const ScalarField& psi() const { return psi_; }

  double value(const Domain&, const GeometryJet& gj,
               const StatePoint& s) const override {
    Mat B = B_(s.x, s.z);
    double vt = std::sqrt(1.0 + s.p.dot(B * s.p));
    return h_(vt) * (B * s.p).dot(gj.gamma) + psi_(s.x, s.z, s.t);
  }

  FunctionJet jet(const Domain& dom, const GeometryJet& gj,
                  const StatePoint& s) const override {
    // p-derivative analytic, x/z by differences (B may carry both).
    FunctionJet j = fd_jet(dom, gj, s);
    Mat B = B_(s.x, s.z);
    double vt = std::sqrt(1.0 + s.p.dot(B * s.p));
    double bg = (B * s.p).dot(gj.gamma);
    j.dp = h_.deriv(vt) * bg * (B * s.p) / vt + h_(vt) * (B * gj.gamma);
    return j;
  }

  Line normal_line(const Domain&, const GeometryJet& gj, const Vec& x,
                   double z, const Vec& p_tan, double t) const override {
    Mat B = B_(x, z);
    double m0 = p_tan.dot(B * p_tan);
    double m1 = (B * p_tan).dot(gj.gamma);
    double m2 = gj.gamma.dot(B * gj.gamma);
    double psi_val = psi_(x, z, t);
    const HFunction h = h_;
    Line ln;
    ln.value = [h, m0, m1, m2, psi_val](double s) {
      double vt = std::sqrt(1.0 + m0 + 2.0 * s * m1 + s * s * m2);
      return h.value(vt) * (m1 + s * m2) + psi_val;
    };
    ln.deriv = [h, m0, m1, m2](double s) {
      double vt2 = 1.0 + m0 + 2.0 * s * m1 + s * s * m2;
      double vt = std::sqrt(vt2);
      double dvt = (m1 + s * m2) / vt;
      return h.deriv(vt) * dvt * (m1 + s * m2) + h.value(vt) * m2;
    };
    return ln;
  }

  double solve_on_line(const Domain&, const Vec& gamma, const Vec& x, double z,
                       const Vec& p_tan, double, double t,
                       double guess) const override {
    Mat B = B_(x, z);
    double m0 = p_tan.dot(B * p_tan);
    double m1 = (B * p_tan).dot(gamma);
    double m2 = gamma.dot(B * gamma);
    double psi_val = psi_(x, z, t);
    auto f = [this, m0, m1, m2, psi_val](double s) {
      double vt = std::sqrt(1.0 + m0 + 2.0 * s * m1 + s * s * m2);
      return h_.value(vt) * (m1 + s * m2) + psi_val;
    };
    auto d = [this, m0, m1, m2](double s) {
      double vt = std::sqrt(1.0 + m0 + 2.0 * s * m1 + s * s * m2);
      double dvt = (m1 + s * m2) / vt;
      return h_.deriv(vt) * dvt * (m1 + s * m2) + h_.value(vt) * m2;
    };
    return monotone_line_root(f, d, guess, 1.0 + std::sqrt(m0));
  }

 private:
  HFunction h_;
  MatrixField B_;
  ScalarField psi_;
};

// b = h(v) beta(x,z).p + psi with unit beta, beta.gamma >= beta_*
class NonvariationalBC : public BoundaryCondition {
 public:
  using VectorField = std::function<Vec(const Vec&, double)>;
  NonvariationalBC(HFunction h, VectorField beta, double beta_star,
                   ScalarField psi)
      : h_(std::move(h)),
        beta_(std::move(beta)),
        beta_star_(beta_star),
        psi_(std::move(psi)) {}
  std::string family() const override { return "nonvariational"; }
  const HFunction& h() const { return h_; }
  double beta_star() const { return beta_star_; }
  Vec beta(const Vec& x, double z) const { return beta_(x, z); }
  const ScalarField& psi() const { return psi_; }

  double value(const Domain&, const GeometryJet&,
               const StatePoint& s) const override {
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    return h_(v) * beta_(s.x, s.z).dot(s.p) + psi_(s.x, s.z, s.t);
  }

  FunctionJet jet(const Domain& dom, const GeometryJet& gj,
                  const StatePoint& s) const override {
    FunctionJet j = fd_jet(dom, gj, s);
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    Vec beta = beta_(s.x, s.z);
    j.dp = h_.deriv(v) * beta.dot(s.p) * s.p / v + h_(v) * beta;
    return j;
  }

  Line normal_line(const Domain&, const GeometryJet& gj, const Vec& x,
                   double z, const Vec& p_tan, double t) const override {
    Vec beta = beta_(x, z);
    double bt = beta.dot(p_tan), bg = beta.dot(gj.gamma);
    double pt2 = p_tan.squaredNorm();
    double psi_val = psi_(x, z, t);
    const HFunction h = h_;
    Line ln;
    ln.value = [h, bt, bg, pt2, psi_val](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h.value(v) * (bt + s * bg) + psi_val;
    };
    ln.deriv = [h, bt, bg, pt2](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h.deriv(v) * (s / v) * (bt + s * bg) + h.value(v) * bg;
    };
    return ln;
  }

  double solve_on_line(const Domain&, const Vec& gamma, const Vec& x, double z,
                       const Vec& p_tan, double pt2, double t,
                       double guess) const override {
    Vec beta = beta_(x, z);
    double bt = beta.dot(p_tan), bg = beta.dot(gamma);
    double psi_val = psi_(x, z, t);
    auto f = [this, bt, bg, pt2, psi_val](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h_.value(v) * (bt + s * bg) + psi_val;
    };
    auto d = [this, bt, bg, pt2](double s) {
      double v = std::sqrt(1.0 + pt2 + s * s);
      return h_.deriv(v) * (s / v) * (bt + s * bg) + h_.value(v) * bg;
    };
    return monotone_line_root(f, d, guess, 1.0 + std::sqrt(pt2));
  }

 private:
  HFunction h_;
  VectorField beta_;
  double beta_star_;
  ScalarField psi_;
};

class CustomBC : public BoundaryCondition {
 public:
  using ValueFn =
      std::function<double(const Vec&, double, const Vec&, const Vec&, double)>;
  // fn(x, z, p, gamma, t)
  explicit CustomBC(ValueFn fn) : fn_(std::move(fn)) {}
  std::string family() const override { return "custom"; }
  double value(const Domain&, const GeometryJet& gj,
               const StatePoint& s) const override {
    return fn_(s.x, s.z, s.p, gj.gamma, s.t);
  }

 private:
  ValueFn fn_;
};

// ---------------------------------------------------------------------------
// family hypothesis checks at construction

struct BoundarySpecLimits {
  double sigma_max = 1e6;  // range scanned for h-based hypotheses
  int n_sigma = 512;
};

inline void check_h_capillary(const HFunction& h, double sup_psi,
                              double lambda0_min = 1.0,
                              const BoundarySpecLimits& lim = {}) {
  double h0_fit = 0.0;
  for (double s : logspace(1.0, lim.sigma_max, lim.n_sigma)) {
    double hv = h(s), hp = h.deriv(s);
    if (hv <= 0.0)
      throw HypothesisViolation("h must be positive, h(" + std::to_string(s) +
                                ")=" + std::to_string(hv));
    if (hp < -hv / s - 1e-12 * (1.0 + std::abs(hp)))
      throw HypothesisViolation("h'(sigma) >= -h/sigma fails at sigma=" +
                                std::to_string(s));
    h0_fit = std::max(h0_fit, hp / (hv * hv));
  }
  // limit of sigma h(sigma) exists by monotonicity; compare at the far end
  double lim_sh = lim.sigma_max * h(lim.sigma_max);
  if (sup_psi / std::sqrt(lambda0_min) >= lim_sh * (1.0 - 1e-9))
    throw HypothesisViolation(
        "lim sigma*h(sigma) must exceed sup|psi| (limit=" +
        std::to_string(lim_sh) + ", sup|psi|=" + std::to_string(sup_psi) + ")");
}

inline void check_h_nonvariational(const HFunction& h, double beta_star,
                                   const BoundarySpecLimits& lim = {}) {
  double hi = 2.0 * beta_star / (1.0 - beta_star);
  for (double s : logspace(1.0, lim.sigma_max, lim.n_sigma)) {
    double r = s * h.deriv(s) / h(s);
    if (r < -beta_star - 1e-12 || r > hi + 1e-12)
      throw HypothesisViolation(
          "sigma h'/h outside [-beta_*, 2beta_*/(1-beta_*)] at sigma=" +
          std::to_string(s));
  }
}

// ---------------------------------------------------------------------------
// Sigma_0 sampling: b = 0 solved for the normal component of p

inline double solve_normal_component(const BoundaryCondition& bc,
                                     const Domain& dom, const GeometryJet& gj,
                                     const Vec& x, double z, const Vec& p_tan,
                                     double t, double guess = 0.0) {
  auto ln = bc.normal_line(dom, gj, x, z, p_tan, t);
  return solve_expanding(ln.value, guess, 1.0 + p_tan.norm(),
                         RootConfig{1e-14, 200});
}

struct Sigma0State {
  StatePoint state;
  GeometryJet gj;
  FunctionJet bjet;
  double v = 1.0, v_prime = 1.0, p_normal = 0.0;
};

// Deterministic sweep over the boundary x-sample, z-grid and tangential
// directions/radii; each record solves b=0 for the normal component.
inline std::vector<Sigma0State> sample_sigma0(const BoundaryCondition& bc,
                                              const Domain& dom,
                                              const SamplePlan& plan,
                                              double min_v = 1.0) {
  std::vector<Sigma0State> out;
  std::mt19937_64 rng(derive_seed(plan.seed, "sigma0"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto bpts = dom.boundary_points(plan.n_boundary);
  int n = dom.dim();
  std::vector<double> ts(plan.n_t, 0.0);
  if (plan.n_t > 1)
    for (int i = 0; i < plan.n_t; ++i)
      ts[i] = plan.t_max * i / (plan.n_t - 1);
  for (const Vec& x : bpts) {
    GeometryJet gj = dom.geometry_jet(x);
    for (double t : ts)
      for (int iz = 0; iz < plan.n_z; ++iz) {
        double z = plan.n_z == 1
                       ? 0.0
                       : -plan.z_range + 2.0 * plan.z_range * iz / (plan.n_z - 1);
        for (double r : plan.radii)
          for (int id = 0; id < plan.n_dir; ++id) {
            Vec dir(n);
            for (int k = 0; k < n; ++k) dir[k] = gauss(rng);
            Vec tang = gj.proj * dir;
            double tn = tang.norm();
            if (tn < 1e-12) continue;
            Vec p_tan = (r / tn) * tang;
            double s;
            try {
              s = solve_normal_component(bc, dom, gj, x, z, p_tan, t);
            } catch (const RootNotBracketed&) {
              continue;
            }
            Sigma0State rec;
            rec.state = StatePoint(x, z, p_tan + s * gj.gamma, t);
            rec.gj = gj;
            rec.bjet = bc.jet(dom, gj, rec.state);
            rec.p_normal = s;
            rec.v = std::sqrt(1.0 + rec.state.p.squaredNorm());
            rec.v_prime = std::sqrt(1.0 + p_tan.squaredNorm());
            if (rec.v >= min_v) out.push_back(std::move(rec));
          }
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// structure constants of the boundary condition

struct BoundaryConstants {
  double Psi = 1.0;     // obliqueness margin: b_p.gamma >= Psi h(v) on Sigma_0
  double beta0 = 1.0;   // |b_p| <= beta0 b_p.gamma
  double c0 = 0.0;      // |p.gamma| <= c0 v'
  double beta1 = 0.0;   // |b_z| <= beta1 v b_p.gamma
  double tau0 = 1.0;
  double eps_x_K = 0.0;  // scale of eps_x before regularization
  std::function<double(double)> eps_x_raw;    // decreasing majorant input
  RegularizedFunction eps_x;                  // certified *-decreasing
  std::function<double(double)> Lambda0;      // |b_t| <= Lambda0(v) b_p.gamma
  bool closed_form = false;
};

namespace detail {

inline RegularizedFunction certify_eps_x(std::function<double(double)> raw,
                                         double domain_start) {
  ScalarFunction1D f;
  f.eval = std::move(raw);
  f.domain_start = domain_start;
  f.tag = Monotonicity::decreasing;
  return iterated_average(f);
}

struct SampledConstants {
  double beta0 = 0.0, c0 = 0.0, beta1 = 0.0, eps_xK = 0.0, lambda0 = 0.0;
  double min_obliq = std::numeric_limits<double>::infinity();
};

inline SampledConstants sampled_suprema(const BoundaryCondition& bc,
                                        const Domain& dom,
                                        const SamplePlan& plan, double tau) {
  SampledConstants c;
  for (const auto& rec : sample_sigma0(bc, dom, plan, tau)) {
    double bg = rec.bjet.dp.dot(rec.gj.gamma);
    if (bg <= 0.0) throw HypothesisViolation("obliqueness fails on Sigma_0");
    c.min_obliq = std::min(c.min_obliq, bg);
    c.beta0 = std::max(c.beta0, rec.bjet.dp.norm() / bg);
    c.c0 = std::max(c.c0, std::abs(rec.p_normal) / rec.v_prime);
    c.beta1 = std::max(c.beta1, std::abs(rec.bjet.dz) / (rec.v * bg));
    c.eps_xK =
        std::max(c.eps_xK, rec.bjet.dx.norm() / (rec.v * rec.v * bg) * rec.v);
    c.lambda0 = std::max(c.lambda0, std::abs(rec.bjet.dt) / bg);
  }
  return c;
}

}  // namespace detail

// Closed forms for the capillary family; sampled suprema with tau-doubling
// stabilization otherwise.
inline BoundaryConstants boundary_constants(const BoundaryCondition& bc,
                                            const Domain& dom,
                                            const SamplePlan& plan) {
  BoundaryConstants out;
  double R0 = dom.R0();
  if (const auto* cap = dynamic_cast<const CapillaryBC*>(&bc)) {
    const auto& h = cap->h();
    // suprema of the datum over the declared boundary sample
    double sup_psi = 0.0, sup_px = 0.0, sup_pz = 0.0, sup_pt = 0.0;
    for (const Vec& x : dom.boundary_points(plan.n_boundary))
      for (int iz = 0; iz < plan.n_z; ++iz) {
        double z = plan.n_z == 1 ? 0.0
                                 : -plan.z_range +
                                       2.0 * plan.z_range * iz / (plan.n_z - 1);
        sup_psi = std::max(sup_psi, std::abs(cap->psi()(x, z)));
        sup_px = std::max(sup_px, cap->psi().grad_x(x, z).norm());
        sup_pz = std::max(sup_pz, std::abs(cap->psi().grad_z(x, z)));
        sup_pt = std::max(sup_pt, std::abs(cap->psi().grad_t(x, z)));
      }
    // tau0 by doubling until the margin 1 - (psi/(v h))^2 stabilizes to 1%
    auto margin = [&](double v) {
      double sh = v * h(v);
      return 1.0 - sqr(sup_psi / sh);
    };
    double tau0 = 1.0;
    for (int k = 0; k < 60; ++k) {
      double m1 = margin(tau0), m2 = margin(2.0 * tau0);
      if (m1 > 0.0 && std::abs(m2 - m1) <= 0.01 * std::abs(m1)) break;
      tau0 *= 2.0;
    }
    double Psi = margin(tau0);
    if (Psi <= 0.0) throw ConstantsDiverge("capillary margin never positive");
    double h0 = 0.0;
    for (double s : logspace(1.0, 1e6, 512))
      h0 = std::max(h0, h.deriv(s) / sqr(h(s)));
    out.Psi = Psi;
    out.tau0 = tau0;
    out.beta0 = std::max(1.0, (1.0 + h0 * sup_psi) / Psi);
    out.c0 = std::sqrt((1.0 - Psi) / Psi);
    out.beta1 = sup_pz / (h(1.0) * Psi);
    out.eps_x_K = sup_px / (h(1.0) * Psi) + 2.0 / (R0 * Psi);
    double K = out.eps_x_K;
    out.eps_x_raw = [K](double s) { return K / s; };
    out.eps_x = detail::certify_eps_x(out.eps_x_raw, 1.0);
    double lt = sup_pt / Psi;
    const HFunction hh = h;
    out.Lambda0 = [lt, hh](double v) { return lt / hh.value(v); };
    out.closed_form = true;
    return out;
  }

  // sampled route with tau-doubling stabilization
  double tau = 1.0;
  detail::SampledConstants prev = detail::sampled_suprema(bc, dom, plan, tau);
  for (int k = 0; k < 8; ++k) {
    detail::SampledConstants next =
        detail::sampled_suprema(bc, dom, plan, 2.0 * tau);
    bool stable = next.beta0 <= prev.beta0 * 1.05 + 1e-12 &&
                  next.c0 <= prev.c0 * 1.05 + 1e-12 &&
                  next.beta1 <= prev.beta1 * 1.05 + 1e-12;
    if (stable) break;
    if (k == 7 && next.beta0 > 2.0 * prev.beta0)
      throw ConstantsDiverge("sampled constants grow with tau");
    prev = next;
    tau *= 2.0;
  }
  out.tau0 = tau;
  out.Psi = 0.0;  // family-specific margin not defined; keep conservative
  out.beta0 = std::max(1.0, prev.beta0 * 1.02);
  out.c0 = prev.c0 * 1.02;
  out.beta1 = prev.beta1 * 1.02;
  // eps_x shape per family: K/sigma for anisotropic/nonvariational,
  // K ln(sigma)/sigma for the power family
  bool log_shape = dynamic_cast<const PowerBC*>(&bc) != nullptr;
  double K = 0.0;
  {
    SamplePlan p2 = plan;
    for (const auto& rec : sample_sigma0(bc, dom, p2, tau)) {
      double bg = rec.bjet.dp.dot(rec.gj.gamma);
      double shape = log_shape ? std::max(1.0, std::log(rec.v)) / rec.v
                               : 1.0 / rec.v;
      K = std::max(K, rec.bjet.dx.norm() / (rec.v * rec.v * bg) / shape);
    }
  }
  out.eps_x_K = K;
  if (log_shape) {
    out.eps_x_raw = [K](double s) {
      return K * std::max(1.0, std::log(s)) / s;
    };
    // ln(s)/s increases until s=e; start the decreasing domain there
    out.eps_x = detail::certify_eps_x(out.eps_x_raw, std::exp(1.0));
  } else {
    out.eps_x_raw = [K](double s) { return K / s; };
    out.eps_x = detail::certify_eps_x(out.eps_x_raw, 1.0);
  }
  double lt = prev.lambda0;
  out.Lambda0 = [lt](double v) { return lt * (1.0 + v); };
  return out;
}

// ---------------------------------------------------------------------------
// condition audit

struct BoundaryAuditOptions {
  // multiplier callbacks for the delta-operator conditions
  std::function<double(double)> mu_star;   // *-decreasing comparison weight
  std::function<double(double)> mu_tilde;  // decreasing, -> 0
  double theta = 1.0;
  double tol = 1e-9;
};

inline double delta1_b(const FunctionJet& bj, const StatePoint& s) {
  return s.p.dot(bj.dp);
}

// delta_2 b = b_z + b_k nu1^k / (p . nu1); on Sigma_0 states nu1 reduces to
// the tangential part of p.
inline double delta2_b(const FunctionJet& bj, const StatePoint& s,
                       const Vec& nu1) {
  double den = s.p.dot(nu1);
  if (std::abs(den) < 1e-12 * (1.0 + s.p.norm() * nu1.norm()))
    throw DegenerateDenominator("p.nu1 ~ 0 in delta_2");
  return bj.dz + bj.dx.dot(nu1) / den;
}

inline ConditionReport boundary_condition_audit(
    const BoundaryCondition& bc, const Domain& dom,
    const BoundaryConstants& cst, const std::vector<std::string>& conditions,
    const SamplePlan& plan, const BoundaryAuditOptions& opts = {}) {
  ConditionReport rep;
  auto states = sample_sigma0(bc, dom, plan, cst.tau0);
  auto has = [&](const std::string& id) {
    return std::find(conditions.begin(), conditions.end(), id) !=
           conditions.end();
  };

  auto mu_star = opts.mu_star ? opts.mu_star
                              : std::function<double(double)>(
                                    [](double s) { return 1.0 / s; });
  auto mu_tilde = opts.mu_tilde ? opts.mu_tilde
                                : std::function<double(double)>(
                                      [](double s) { return 1.0 / s; });

  if (has("E10.32")) {
    MarginTracker t;
    std::mt19937_64 rng(derive_seed(plan.seed, "E10.32"));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const Vec& x : dom.boundary_points(plan.n_boundary)) {
      GeometryJet gj = dom.geometry_jet(x);
      for (double r : plan.radii) {
        Vec dir(dom.dim());
        for (int k = 0; k < dom.dim(); ++k) dir[k] = gauss(rng);
        if (dir.norm() < 1e-12) continue;
        Vec p = r * dir / dir.norm();
        StatePoint s(x, 0.0, p, 0.0);
        double v = std::sqrt(1.0 + p.squaredNorm());
        if (v < cst.tau0) continue;
        double tau = 10.0 * (1.0 + cst.c0) * v;
        StatePoint sp(x, 0.0, (p + tau * gj.gamma).eval(), 0.0);
        StatePoint sm(x, 0.0, (p - tau * gj.gamma).eval(), 0.0);
        double m = std::min(bc.value(dom, gj, sp), -bc.value(dom, gj, sm));
        t.update(m, s);
      }
    }
    rep.add(t.result("E10.32", opts.tol));
  }

  MarginTracker t33a, t33b, t35a, t35b, td1, td2, tbeta11, tdbeta, tdbeta1,
      ttheta, tbt, tobliq;
  double beta3_fit = 0.0;
  for (const auto& rec : states) {
    const auto& s = rec.state;
    double bg = rec.bjet.dp.dot(rec.gj.gamma);
    tobliq.update(bg, s);
    if (has("E10.33a"))
      t33a.update(cst.beta0 * bg - rec.bjet.dp.norm(), s);
    if (has("E10.33b"))
      t33b.update(cst.c0 * rec.v_prime - std::abs(rec.p_normal), s);
    if (has("E10.35a"))
      t35a.update(cst.eps_x(rec.v) * rec.v * rec.v * bg - rec.bjet.dx.norm(),
                  s);
    if (has("E10.35b"))
      t35b.update(cst.beta1 * rec.v * bg - std::abs(rec.bjet.dz), s);
    if (has("Ebetat"))
      tbt.update(cst.Lambda0(rec.v) * bg - std::abs(rec.bjet.dt), s);

    double d1 = delta1_b(rec.bjet, s);
    double d2 = 0.0;
    bool have_d2 = true;
    try {
      Vec nu1 = s.p - rec.p_normal * rec.gj.gamma;  // nu1 = p' on Sigma_0
      d2 = delta2_b(rec.bjet, s, nu1);
    } catch (const DegenerateDenominator&) {
      have_d2 = false;
    }
    if (has("Edelta1b"))
      td1.update(mu_tilde(rec.v) * bg - mu_star(rec.v) * d1, s);
    if (has("Edelta1b") && have_d2)
      td2.update(mu_tilde(rec.v) * bg - mu_star(rec.v) * d2, s);
    if (has("Ebeta11")) {
      double lhs = rec.bjet.dx.norm() + rec.v * std::abs(rec.bjet.dz);
      beta3_fit = std::max(beta3_fit, lhs / (rec.v * rec.v * bg));
    }
    if (has("Edelta1beta"))
      tdbeta.update(cst.eps_x(rec.v) * rec.v * bg - rec.bjet.dz, s);
    if (has("Edelta1beta1")) {
      double lhs = std::max(d1, have_d2 ? d2 : d1);
      tdbeta1.update(rec.v * bg - mu_star(rec.v) * lhs, s);
    }
    if (has("Ethetadelta")) {
      double lhs = std::max(d1, have_d2 ? d2 : d1);
      ttheta.update(std::pow(rec.v, opts.theta) * mu_tilde(rec.v) * bg - lhs,
                    s);
    }
  }
  rep.add(tobliq.result("obliqueness", -1e-12));
  if (has("E10.33a")) rep.add(t33a.result("E10.33a", opts.tol));
  if (has("E10.33b")) rep.add(t33b.result("E10.33b", opts.tol));
  if (has("E10.35a")) rep.add(t35a.result("E10.35a", opts.tol));
  if (has("E10.35b")) rep.add(t35b.result("E10.35b", opts.tol));
  if (has("Ebetat")) rep.add(tbt.result("Ebetat", opts.tol));
  if (has("Edelta1b")) {
    rep.add(td1.result("Edelta1b1", opts.tol));
    rep.add(td2.result("Edelta1b2", opts.tol));
  }
  if (has("Ebeta11")) {
    ConditionResult r;
    r.id = "Ebeta11";
    r.pass = std::isfinite(beta3_fit);
    r.margin = 0.0;
    r.fitted["beta3"] = beta3_fit;
    rep.add(r);
  }
  if (has("Edelta1beta")) rep.add(tdbeta.result("Edelta1beta", opts.tol));
  if (has("Edelta1beta1")) rep.add(tdbeta1.result("Edelta1beta1", opts.tol));
  if (has("Ethetadelta")) rep.add(ttheta.result("Ethetadelta", opts.tol));

  if (has("Elimbz")) {
    // decay of b_z / b_p.gamma along the radius sweep
    std::vector<double> sups;
    for (double r : plan.radii) {
      SamplePlan single = plan;
      single.radii = {r};
      double sup = 0.0;
      for (const auto& rec : sample_sigma0(bc, dom, single, cst.tau0))
        sup = std::max(sup,
                       std::abs(rec.bjet.dz) / rec.bjet.dp.dot(rec.gj.gamma));
      sups.push_back(sup);
    }
    ConditionResult r;
    r.id = "Elimbz";
    std::size_t last = sups.size() - 1;
    double a = sups[last - 1], b = sups[last];
    double slope =
        (a > 0 && b > 0)
            ? std::log(b / a) / std::log(plan.radii[last] / plan.radii[last - 1])
            : -1.0;
    r.fitted["tail_slope"] = slope;
    r.fitted["last_sup"] = b;
    r.pass = (b < 1e-10) || slope < -0.1;
    r.margin = -slope;
    rep.add(r);
  }
  return rep;
}

}  // namespace oblab
