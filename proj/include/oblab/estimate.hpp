#pragma once

#include "oblab/boundary.hpp"
#include "oblab/common.hpp"
#include "oblab/geometry.hpp"
#include "oblab/nfun.hpp"
#include "oblab/quadrature.hpp"
#include "oblab/report.hpp"
#include "oblab/solver.hpp"
#include "oblab/structure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace oblab {

// ---------------------------------------------------------------------------
// Riccati equation chi' = A chi^2 + B chi + eta, chi(m) = 0: largest eta
// keeping chi finite on [m, M]

struct ChiFunction {
  double m = 0.0, M = 1.0;
  std::vector<double> z, val, cum;  // cum[i] = int_m^{z_i} chi

  double operator()(double zz) const {
    if (zz <= z.front()) return val.front();
    if (zz >= z.back()) return val.back();
    auto it = std::upper_bound(z.begin(), z.end(), zz);
    std::size_t k = it - z.begin() - 1;
    double w = (zz - z[k]) / (z[k + 1] - z[k]);
    return (1.0 - w) * val[k] + w * val[k + 1];
  }
  double integral(double zz) const {  // int_m^zz chi
    if (zz <= z.front()) return 0.0;
    if (zz >= z.back()) return cum.back();
    auto it = std::upper_bound(z.begin(), z.end(), zz);
    std::size_t k = it - z.begin() - 1;
    double chi_z = (*this)(zz);
    return cum[k] + 0.5 * (val[k] + chi_z) * (zz - z[k]);
  }
};

struct RiccatiOptions {
  double eta_cap = 1e6;
  double chi_cap = 1e8;
  double tol = 1e-6;
  int grid = 4096;
};

struct RiccatiResult {
  double eta_max = 0.0;
  bool capped = false;
  ChiFunction chi;
};

namespace detail {

// integrate chi' = A chi^2 + B chi + eta from m with chi(m) = 0; returns
// false on blow-up past chi_cap.  Sub-steps adapt to the local slope.
inline bool integrate_riccati(double A, double B, double eta, double m,
                              double M, const RiccatiOptions& opts,
                              ChiFunction* out) {
  int n = opts.grid;
  double dz = (M - m) / n;
  double chi = 0.0;
  if (out) {
    out->m = m;
    out->M = M;
    out->z.assign(1, m);
    out->val.assign(1, 0.0);
    out->cum.assign(1, 0.0);
  }
  auto rhs = [&](double c) { return A * c * c + B * c + eta; };
  for (int i = 0; i < n; ++i) {
    double z0 = m + i * dz;
    double target = z0 + dz;
    double zz = z0;
    while (zz < target) {
      double f = rhs(chi);
      double step = std::min(target - zz,
                             0.2 * (1.0 + std::abs(chi)) /
                                 (1.0 + std::abs(f)));
      // classic RK4
      double k1 = rhs(chi);
      double k2 = rhs(chi + 0.5 * step * k1);
      double k3 = rhs(chi + 0.5 * step * k2);
      double k4 = rhs(chi + step * k3);
      chi += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      zz += step;
      if (!std::isfinite(chi) || std::abs(chi) > opts.chi_cap) return false;
    }
    if (out) {
      double prev = out->val.back();
      out->cum.push_back(out->cum.back() + 0.5 * (prev + chi) * dz);
      out->z.push_back(target);
      out->val.push_back(chi);
    }
  }
  return true;
}

}  // namespace detail

inline RiccatiResult riccati_eta(double A_inf, double B_inf, double m,
                                 double M, const RiccatiOptions& opts = {}) {
  if (M <= m) throw Error("riccati_eta: empty interval");
  RiccatiResult res;
  if (detail::integrate_riccati(A_inf, B_inf, opts.eta_cap, m, M, opts,
                                &res.chi)) {
    res.eta_max = opts.eta_cap;
    res.capped = true;
    return res;
  }
  double lo = 0.0, hi = opts.eta_cap;
  if (!detail::integrate_riccati(A_inf, B_inf, 0.0, m, M, opts, nullptr))
    throw NoPositiveEta("chi blows up even for eta -> 0+");
  while (hi - lo > opts.tol * std::max(1.0, lo)) {
    double mid = 0.5 * (lo + hi);
    if (detail::integrate_riccati(A_inf, B_inf, mid, m, M, opts, nullptr)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  detail::integrate_riccati(A_inf, B_inf, lo, m, M, opts, &res.chi);
  res.eta_max = lo;
  return res;
}

// ---------------------------------------------------------------------------
// substitution psi from chi: psi' (as a function of the new variable) solves
// d psi'/d psi = chi(psi) psi', i.e. Psi(z) = int_m^z exp(-int_m^z' chi) dz'

struct Substitution {
  ChiFunction chi;
  double m = 0.0, M = 1.0;
  double eta = 0.0;
  std::vector<double> zgrid, Psigrid;  // Psi on [m, M]
  double S_total = 0.0;

  double Psi(double z) const {
    if (z <= zgrid.front()) return z - m;
    if (z >= zgrid.back())
      return Psigrid.back() + (z - zgrid.back()) * std::exp(-chi.cum.back());
    auto it = std::upper_bound(zgrid.begin(), zgrid.end(), z);
    std::size_t k = it - zgrid.begin() - 1;
    // trapezoid-consistent local integral of exp(-X)
    double e0 = std::exp(-chi.integral(zgrid[k]));
    double ez = std::exp(-chi.integral(z));
    return Psigrid[k] + 0.5 * (e0 + ez) * (z - zgrid[k]);
  }
  // psi = Psi^{-1} by monotone bisection + local Newton
  double psi(double s) const {
    if (s <= 0.0) return m + s;
    if (s >= S_total) return M + (s - S_total) * std::exp(chi.cum.back());
    auto it = std::upper_bound(Psigrid.begin(), Psigrid.end(), s);
    std::size_t k = std::min<std::size_t>(Psigrid.size() - 2,
                                          it - Psigrid.begin() - 1);
    double z = zgrid[k];
    for (int i = 0; i < 60; ++i) {
      double f = Psi(z) - s;
      double d = std::exp(-chi.integral(z));
      double step = f / d;
      z -= step;
      z = std::min(std::max(z, m), M);
      if (std::abs(step) < 1e-14 * (1.0 + std::abs(z))) break;
    }
    return z;
  }
  double psi_prime(double s) const { return std::exp(chi.integral(psi(s))); }
  double psi_second(double s) const {
    double ps = psi(s);
    double pp = std::exp(chi.integral(ps));
    return chi(ps) * pp * pp;
  }
  double omega(double s) const { return chi(psi(s)); }
  // psi' and omega as functions of z = psi(s) (the solution variable)
  double psi_prime_of_z(double z) const { return std::exp(chi.integral(z)); }
  double omega_of_z(double z) const { return chi(z); }
};

inline Substitution build_psi(const ChiFunction& chi, double m, double M,
                              double eta = 0.0) {
  Substitution sub;
  sub.chi = chi;
  sub.m = m;
  sub.M = M;
  sub.eta = eta;
  int n = static_cast<int>(chi.z.size());
  sub.zgrid = chi.z;
  sub.Psigrid.assign(n, 0.0);
  for (int k = 1; k < n; ++k) {
    double e0 = std::exp(-chi.cum[k - 1]);
    double e1 = std::exp(-chi.cum[k]);
    sub.Psigrid[k] =
        sub.Psigrid[k - 1] + 0.5 * (e0 + e1) * (chi.z[k] - chi.z[k - 1]);
  }
  sub.S_total = sub.Psigrid.back();
  return sub;
}

inline Substitution identity_substitution(double m, double M) {
  ChiFunction chi;
  chi.m = m;
  chi.M = M;
  chi.z = {m, M};
  chi.val = {0.0, 0.0};
  chi.cum = {0.0, 0.0};
  return build_psi(chi, m, M);
}

// small-oscillation mode: chi' = c + 1 with chi(m) = 0 (linear chi)
inline Substitution small_oscillation_substitution(double c, double m,
                                                   double M) {
  ChiFunction chi;
  chi.m = m;
  chi.M = M;
  int n = 1024;
  for (int i = 0; i <= n; ++i) {
    double z = m + (M - m) * i / n;
    chi.z.push_back(z);
    chi.val.push_back((c + 1.0) * (z - m));
  }
  chi.cum.assign(n + 1, 0.0);
  for (int i = 1; i <= n; ++i)
    chi.cum[i] = chi.cum[i - 1] +
                 0.5 * (chi.val[i - 1] + chi.val[i]) * (chi.z[i] - chi.z[i - 1]);
  return build_psi(chi, m, M);
}

// ---------------------------------------------------------------------------
// auxiliary fields w1, w2, w3 on a 1-D grid solution

struct AuxFields {
  double eps = 0.0;
  NMode mode = NMode::cheap;
  double k1 = 0.0, k3 = 0.0;
  std::string provenance;  // substitution + eps tag for mismatch detection
  std::vector<char> valid;        // geometry defined at the node
  std::vector<double> d;          // distance to the boundary
  std::vector<double> ubar, psi_prime, omega;
  std::vector<double> Nval, Np_gamma, Nz, Nx;
  std::vector<double> w1, w2, w3;
  std::vector<double> kappa;      // first-order coefficient of L
  std::vector<double> Sfield;     // the curvature-quadratic S
};

struct WFieldOptions {
  double k1 = 0.1;
  double k3 = 0.0;
  std::function<double(double)> mu_star;  // *-decreasing weight, default K/s
  bool special_w2 = false;  // integrand 1 + eps_x(sqrt s) sqrt s instead
};

inline AuxFields w_fields(const GridSolution& sol,
                          const EquationCoefficients& eq,
                          const BoundaryCondition& bc, const Domain& dom,
                          const BoundaryConstants& cst, const Substitution& sub,
                          double eps, const WFieldOptions& opts = {},
                          double time = 0.0, const Vec* frame = nullptr) {
  if (sol.is_disk)
    throw Error("w_fields: grid audits are implemented for 1-D meshes");
  const Vec& u = frame ? *frame : sol.u;
  AuxFields f;
  f.eps = eps;
  f.k1 = opts.k1;
  f.k3 = opts.k3;
  f.provenance = "eps=" + fmt_g(eps) + ";eta=" + fmt_g(sub.eta);
  auto mu_star = opts.mu_star
                     ? opts.mu_star
                     : std::function<double(double)>(
                           [](double s) { return 1.0 / std::max(s, 1e-12); });
  int nn = sol.mesh.nodes();
  f.valid.assign(nn, 1);
  f.d.resize(nn);
  f.ubar.resize(nn);
  f.psi_prime.resize(nn);
  f.omega.resize(nn);
  f.Nval.assign(nn, 0.0);
  f.Np_gamma.assign(nn, 0.0);
  f.Nz.assign(nn, 0.0);
  f.Nx.assign(nn, 0.0);
  f.w1.assign(nn, 0.0);
  f.w2.assign(nn, 0.0);
  f.w3.assign(nn, 0.0);
  f.kappa.assign(nn, 0.0);
  f.Sfield.assign(nn, 0.0);

  for (int i = 0; i < nn; ++i) {
    Vec x(1);
    x << sol.mesh.x(i);
    f.d[i] = dom.distance(x);
    double z = u[i];
    f.ubar[i] = sub.Psi(z);
    double pp = sub.psi_prime_of_z(z);
    f.psi_prime[i] = pp;
    f.omega[i] = sub.omega_of_z(z);
    Vec p(1);
    p << sol.Du1(i, u);
    StatePoint st(x, z, p, time);
    NEvaluation ev;
    try {
      ev = solve_N(bc, dom, cst, st, eps, NMode::cheap);
      GeometryJet gj = dom.geometry_jet(x);
      f.Np_gamma[i] = ev.N_p.dot(gj.gamma);
    } catch (const OutsideCollar&) {
      // distance-function ridge (e.g. interval midpoint): no N there
      f.valid[i] = 0;
      continue;
    }
    f.Nval[i] = ev.N;
    f.Nz[i] = ev.N_z;
    f.Nx[i] = ev.N_x[0];
    // w1 = c^{km} D_k ubar D_m ubar + eps N^2 / psi'^2; in 1-D the
    // tangential projector vanishes
    f.w1[i] = eps * ev.N * ev.N / (pp * pp);
    double integral;
    if (!opts.special_w2) {
      integral = integrate(
          [&](double sig) { return 1.0 / mu_star(std::sqrt(sig)); }, 0.0,
          f.w1[i], QuadratureConfig{1e-12, 4000});
    } else {
      integral = integrate(
          [&](double sig) {
            double r = std::sqrt(sig);
            return 1.0 + cst.eps_x(std::max(r, 1e-8)) * r;
          },
          0.0, f.w1[i], QuadratureConfig{1e-12, 4000});
    }
    f.w2[i] = f.w1[i] + opts.k1 * f.d[i] * integral;
    f.w3[i] = std::exp(-opts.k3 * time) * f.w2[i];
    // kappa = psi' a^{jk,i} D_jk ubar + a^i + omega E^i (scalar in 1-D)
    double d2ubar = sol.D2u1(i, u) / pp -
                    f.omega[i] * sqr(sol.Du1(i, u)) / pp;
    // chain rule: D2 ubar = (D2u - omega (Du)^2 ... ) / psi'
    auto dp = eq.aij_p(st);
    double Ep = eq.E_p(st)[0];
    f.kappa[i] = pp * dp[0](0, 0) * d2ubar + eq.a().dp(st)[0] +
                 f.omega[i] * Ep;
  }
  return f;
}

// ---------------------------------------------------------------------------
// cutoff for local estimates on ball geometry

class ZetaCutoff {
 public:
  ZetaCutoff(const Domain& dom, const Vec& y, double R, double beta0)
      : R_(R) {
    GeometryJet gj = dom.geometry_jet(y);
    double delta = 1.0 / (32.0 * beta0 * beta0);
    a_ = 0.25 - delta;
    tau_cut_ = delta;
    center_ = y + a_ * R * gj.gamma;
    d0_ = a_ * R;
  }

  double tau(const Vec& x) const {
    return ((x - center_).squaredNorm() - d0_ * d0_) / (R_ * R_);
  }
  double value(const Vec& x) const { return 0.75 * Q(tau(x) / tau_cut_); }
  Vec grad(const Vec& x) const {
    double s = tau(x) / tau_cut_;
    return (0.75 * dQ(s) / tau_cut_) * (2.0 / (R_ * R_)) * (x - center_);
  }
  Mat hess(const Vec& x) const {
    int n = static_cast<int>(x.size());
    double s = tau(x) / tau_cut_;
    Vec dtau = (2.0 / (R_ * R_)) * (x - center_);
    return 0.75 * (d2Q(s) / (tau_cut_ * tau_cut_) * dtau * dtau.transpose() +
                   dQ(s) / tau_cut_ * (2.0 / (R_ * R_)) *
                       Mat::Identity(n, n));
  }
  double radius() const { return R_; }

 private:
  // descending quintic smoothstep on [0,1], clamped C^2 outside
  static double Q(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return -std::pow(s - 1.0, 3);
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
  }
  static double dQ(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return -3.0 * sqr(s - 1.0);
    return -(30.0 * s * s - 60.0 * s * s * s + 30.0 * s * s * s * s);
  }
  static double d2Q(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return -6.0 * (s - 1.0);
    return -(60.0 * s - 180.0 * s * s + 120.0 * s * s * s);
  }

  double R_, a_, tau_cut_, d0_;
  Vec center_;
};

// sampled verification of the cutoff properties
inline ConditionReport zeta_cutoff_audit(const Domain& dom,
                                         const BoundaryCondition& bc,
                                         const Vec& y, double R, double beta0,
                                         int n_sample = 64) {
  ZetaCutoff zeta(dom, y, R, beta0);
  ConditionReport rep;
  {
    ConditionResult r;
    r.id = "zeta-center";
    r.margin = 0.0;
    r.pass = std::abs(zeta.value(y) - 0.75) < 1e-12;
    rep.add(r);
  }
  MarginTracker outside, oblique, sizebound;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int n = dom.dim();
  for (int k = 0; k < n_sample; ++k) {
    Vec dir(n);
    for (int i = 0; i < n; ++i) dir[i] = gauss(rng);
    dir.normalize();
    // outside B(y, R/2): zeta <= 0
    for (double fac : {0.51, 0.75, 1.5, 4.0}) {
      Vec x = y + fac * R * dir;
      StatePoint w(x, 0.0, dir, 0.0);
      outside.update(-zeta.value(x), w);
    }
    // size bound R |Dzeta| + R^2 |D^2 zeta| <= c
    Vec x = y + 0.3 * R * dir;
    double size = R * zeta.grad(x).norm() + R * R * zeta.hess(x).norm();
    StatePoint w(x, 0.0, dir, 0.0);
    sizebound.update(60.0 - size, w);
  }
  // b_p . D zeta >= 0 where zeta >= 0 at boundary points
  for (const Vec& xb : dom.boundary_points(n_sample)) {
    if ((xb - y).norm() > 0.6 * R) continue;
    if (zeta.value(xb) < 0.0) continue;
    GeometryJet gj = dom.geometry_jet(xb);
    std::mt19937_64 rng2(derive_seed(97, "zeta"));
    for (double r : {2.0, 20.0}) {
      Vec dir(n);
      for (int i = 0; i < n; ++i) dir[i] = gauss(rng2);
      if (dir.norm() < 1e-12) continue;
      Vec p_tan = gj.proj * dir;
      if (p_tan.norm() > 1e-12) p_tan *= r / p_tan.norm();
      double s;
      try {
        s = solve_normal_component(bc, dom, gj, xb, 0.0, p_tan, 0.0);
      } catch (const RootNotBracketed&) {
        continue;
      }
      StatePoint st(xb, 0.0, (p_tan + s * gj.gamma).eval(), 0.0);
      auto bj = bc.jet(dom, gj, st);
      oblique.update(bj.dp.dot(zeta.grad(xb)), st);
    }
  }
  rep.add(outside.result("zeta-outside", 1e-12));
  rep.add(oblique.result("zeta-oblique-sign", 1e-10));
  rep.add(sizebound.result("zeta-size-bound", 0.0));
  return rep;
}

// ---------------------------------------------------------------------------
// maximum-principle audits

enum class AuditMode { global, local_zeta, parabolic, parabolic_local };

struct AuditCheck {
  std::string id;
  std::string region;
  bool pass = true;
  double margin = 0.0;
  double witness_x = 0.0;
  double witness_t = 0.0;
  std::map<std::string, double> fitted;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const AuditCheck* find(const std::string& id) const {
    for (const auto& c : checks)
      if (c.id == id) return &c;
    return nullptr;
  }
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) {
      nlohmann::json j{{"id", c.id},       {"region", c.region},
                       {"pass", c.pass},   {"margin", c.margin},
                       {"x", c.witness_x}, {"t", c.witness_t}};
      j["fitted"] = c.fitted;
      arr.push_back(j);
    }
    return arr;
  }
};

struct MaxPrincipleOptions {
  double M1 = -1.0;             // <0: fit the smallest admissible threshold
  double M4 = -1.0;
  double c_disc = 25.0;         // discretization slack: L w2 >= -c_disc h
  AuditMode mode = AuditMode::global;
};

namespace detail {

// discrete L w = a^{ij} D_ij w + kappa^i D_i w on the 1-D grid
inline double discrete_Lw(const GridSolution& sol,
                          const EquationCoefficients& eq, const Vec& u,
                          const std::vector<double>& w,
                          const std::vector<double>& kappa, int i,
                          double time) {
  Vec wv = Eigen::Map<const Vec>(w.data(), w.size());
  double dw = sol.Du1(i, wv);
  double d2w = sol.D2u1(i, wv);
  Vec x(1), p(1);
  x << sol.mesh.x(i);
  p << sol.Du1(i, u);
  StatePoint st(x, u[i], p, time);
  return eq.aij(st)(0, 0) * d2w + kappa[i] * dw;
}

}  // namespace detail

inline AuditReport maximum_principle_audit(
    const GridSolution& sol, const EquationCoefficients& eq,
    const BoundaryCondition& bc, const Domain& dom,
    const BoundaryConstants& cst, const Substitution& sub, AuxFields& fields,
    const MaxPrincipleOptions& opts = {}) {
  if (fields.provenance !=
      "eps=" + fmt_g(fields.eps) + ";eta=" + fmt_g(sub.eta))
    throw FieldMismatch("aux fields built with a different substitution");
  AuditReport rep;
  const Vec& u = sol.u;
  int nn = sol.mesh.nodes();
  double h = sol.mesh.h();
  double R0 = dom.R0();

  // (i) substitution identity: psi' a D2 ubar + a + omega E versus the
  // plain PDE residual a D2u + a, both from grid derivatives
  {
    Vec ubar = Eigen::Map<const Vec>(fields.ubar.data(), nn);
    double worst = 0.0, where = 0.0;
    for (int i = 1; i < nn - 1; ++i) {
      Vec x(1), p(1);
      x << sol.mesh.x(i);
      p << sol.Du1(i, u);
      StatePoint st(x, u[i], p, 0.0);
      double A = eq.aij(st)(0, 0);
      double lhs = fields.psi_prime[i] * A * sol.D2u1(i, ubar) +
                   eq.a().value(st) + fields.omega[i] * eq.E(st);
      double rhs = A * sol.D2u1(i) + eq.a().value(st);
      double dev = std::abs(lhs - rhs);
      if (dev > worst) {
        worst = dev;
        where = x[0];
      }
    }
    AuditCheck c;
    c.id = "E15.17";
    c.region = "interior";
    c.margin = 10.0 * h * h * (1.0 + sol.sup_Du()) - worst;
    c.fitted["residual"] = worst;
    c.fitted["h2"] = h * h;
    c.pass = c.margin >= 0.0;
    c.witness_x = where;
    rep.checks.push_back(c);
  }

  // audit set: collar nodes d < R0/4 whose stencils stay valid
  std::vector<int> collar;
  for (int i = 0; i < nn; ++i) {
    if (!(fields.d[i] < 0.25 * R0 && fields.d[i] > 0.0)) continue;
    bool ok = true;
    for (int j = std::max(0, i - 2); j <= std::min(nn - 1, i + 2); ++j)
      ok = ok && fields.valid[j];
    if (ok) collar.push_back(i);
  }

  // (ii) interior sign of L w2 on {w1 >= M1}
  double M1 = opts.M1;
  auto min_Lw2_above = [&](double thr, double* witness) {
    double worst = 1e300;
    for (int i : collar) {
      if (i == 0 || i == nn - 1) continue;
      if (fields.w1[i] < thr) continue;
      double L = detail::discrete_Lw(sol, eq, u, fields.w2, fields.kappa, i,
                                     0.0);
      if (L < worst) {
        worst = L;
        if (witness) *witness = sol.mesh.x(i);
      }
    }
    return worst;
  };
  if (M1 < 0.0) {
    // smallest grid-observed threshold making the sign condition hold
    std::vector<double> candidates;
    for (int i : collar) candidates.push_back(fields.w1[i]);
    std::sort(candidates.begin(), candidates.end());
    M1 = candidates.empty() ? 0.0 : candidates.back();
    for (double thr : candidates) {
      if (min_Lw2_above(thr, nullptr) >= -opts.c_disc * h) {
        M1 = thr;
        break;
      }
    }
  }
  {
    double wx = 0.0;
    double worst = min_Lw2_above(M1, &wx);
    AuditCheck c;
    c.id = "ELw2-interior-sign";
    c.region = "E = {w1 >= M1} cap collar";
    c.fitted["M1"] = M1;
    c.fitted["min_Lw2"] = worst == 1e300 ? 0.0 : worst;
    c.fitted["C"] = worst == 1e300 ? 0.0 : std::max(0.0, -worst) / h;
    c.margin = worst == 1e300 ? 0.0 : worst + opts.c_disc * h;
    c.pass = c.margin >= 0.0;
    c.witness_x = wx;
    rep.checks.push_back(c);
  }

  // (iii) boundary sign b_p . D w2 > 0 where w1 >= M4
  double M4 = opts.M4;
  {
    Vec w2v = Eigen::Map<const Vec>(fields.w2.data(), nn);
    auto boundary_margin = [&](double thr, double* witness) {
      double worst = 1e300;
      for (int i : {0, nn - 1}) {
        Vec x(1), p(1);
        x << sol.mesh.x(i);
        if (fields.w1[i] < thr) continue;
        p << sol.Du1(i, u);
        StatePoint st(x, u[i], p, 0.0);
        GeometryJet gj = dom.geometry_jet(x);
        auto bj = bc.jet(dom, gj, st);
        double dw2 = sol.Du1(i, w2v);
        double val = bj.dp[0] * dw2;
        if (val < worst) {
          worst = val;
          if (witness) *witness = x[0];
        }
      }
      return worst;
    };
    if (M4 < 0.0) {
      std::vector<double> candidates = {fields.w1[0], fields.w1[nn - 1]};
      std::sort(candidates.begin(), candidates.end());
      M4 = candidates.back() + 1.0;
      for (double thr : candidates)
        if (boundary_margin(thr, nullptr) > 0.0) {
          M4 = thr;
          break;
        }
    }
    double wx = 0.0;
    double worst = boundary_margin(M4, &wx);
    AuditCheck c;
    c.id = "boundary-sign";
    c.region = "E3: boundary nodes with w1 >= M4";
    c.fitted["M4"] = M4;
    c.margin = worst == 1e300 ? 0.0 : worst;
    c.pass = worst == 1e300 || worst > 0.0;
    c.witness_x = wx;
    rep.checks.push_back(c);
  }

  // (iv) location of the maximum of w2 over the closed collar set
  {
    double best = -1e300;
    int arg = -1;
    for (int i : collar) {
      if (fields.w1[i] < M1 && i != 0 && i != nn - 1) continue;
      if (fields.w2[i] > best) {
        best = fields.w2[i];
        arg = i;
      }
    }
    // include boundary nodes regardless
    for (int i : {0, nn - 1})
      if (fields.w2[i] > best) {
        best = fields.w2[i];
        arg = i;
      }
    AuditCheck c;
    c.id = "max-location";
    c.witness_x = arg >= 0 ? sol.mesh.x(arg) : 0.0;
    bool on_E3 = (arg == 0 || arg == nn - 1);
    bool on_E1 = arg >= 0 && std::abs(fields.d[arg] - 0.25 * R0) <= 1.6 * h;
    bool on_E2 = arg >= 0 && fields.w1[arg] <= M1 * (1.0 + 1e-9) + 1e-12;
    c.region = on_E3 ? "E3" : (on_E1 ? "E1" : (on_E2 ? "E2" : "interior"));
    c.pass = on_E1 || on_E2 || on_E3 || arg < 0;
    c.margin = c.pass ? 0.0 : -1.0;
    rep.checks.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// parabolic interior gradient estimate audit (|Du|^2 test function)

struct InteriorParabolicResult {
  AuditReport report;
  double T0 = 0.0;
  double K = 0.0;
  double sup_Du_conclusion = 0.0;  // sup over B(x0,R/2) x (0,T0)
  double rhs_bound = 0.0;          // 4 max{M0, sup_{t=0} |Du|}
};

// identity and conclusion of the interior estimate: L w = 2 C^2 - 2 [...] w
// with w = |Du|^2, kappa^i = a^{jk,i} D_jk u + a^i.
inline InteriorParabolicResult interior_parabolic_audit(
    const GridSolution& sol, const EquationCoefficients& eq, double x0,
    double R, double M0, double q = 3.0, double mu7 = 2.0) {
  InteriorParabolicResult out;
  const auto& mesh = sol.mesh;
  int nn = mesh.nodes();
  double h = mesh.h();

  // identity residual on a mid frame plus the structural constants
  double mu5 = 0.0;
  {
    std::size_t kf = sol.frames.size() / 2;
    if (kf == 0 && sol.frames.size() > 1) kf = 1;
    const Vec& u = sol.frames[kf];
    const Vec& um = sol.frames[kf - 1];
    double dt = sol.times[kf] - sol.times[kf - 1];
    std::vector<double> w(nn), wprev(nn);
    for (int i = 0; i < nn; ++i) {
      w[i] = sqr(sol.Du1(i, u));
      wprev[i] = sqr(sol.Du1(i, um));
    }
    Vec wv = Eigen::Map<const Vec>(w.data(), nn);
    double worst = 0.0, where = 0.0;
    for (int i = 2; i < nn - 2; ++i) {
      Vec x(1), p(1);
      x << mesh.x(i);
      p << sol.Du1(i, u);
      StatePoint st(x, u[i], p, sol.times[kf]);
      double A = eq.aij(st)(0, 0);
      mu5 = std::max(mu5, std::max(eq.Lambda(st),
                                   std::max(delta3(eq.a(), st),
                                            eq.a().dp(st).norm())));
      auto dp = eq.aij_p(st);
      double kappa = dp[0](0, 0) * sol.D2u1(i, u) + eq.a().dp(st)[0];
      double Lw = -(w[i] - wprev[i]) / dt + A * sol.D2u1(i, wv) +
                  kappa * sol.Du1(i, wv);
      // C^2 = a^{ij} delta^{km} D_ik u D_jm u  ->  A (D2u)^2 in 1-D
      double C2 = A * sqr(sol.D2u1(i, u));
      Mat d3aij = eq.aij_z(st);
      auto dxa = eq.aij_x(st);
      double pnorm = st.p.norm();
      double d3aij_d2u =
          (d3aij(0, 0) + (pnorm > 1e-12 ? dxa[0](0, 0) * st.p[0] / pnorm : 0.0)) *
          sol.D2u1(i, u);
      double rhs = 2.0 * C2 - 2.0 * (d3aij_d2u + delta3(eq.a(), st)) * w[i];
      double dev = std::abs(Lw - rhs);
      if (dev > worst) {
        worst = dev;
        where = x[0];
      }
    }
    AuditCheck c;
    c.id = "ELw-identity";
    c.region = "interior";
    c.fitted["residual"] = worst;
    double du_scale = 1.0 + sol.sup_Du();
    c.margin = 50.0 * (h + dt) * du_scale * du_scale - worst;
    c.pass = c.margin >= 0.0;
    c.witness_x = where;
    out.report.checks.push_back(c);
  }

  // module-computed T0: J4 >= qK - C with C fitted over the cylinder
  {
    double C_fit = 0.0;
    for (std::size_t kf = 1; kf < sol.frames.size(); ++kf) {
      const Vec& u = sol.frames[kf];
      for (int i = 1; i < nn - 1; ++i) {
        double xx = mesh.x(i);
        if (std::abs(xx - x0) > R) continue;
        Vec x(1), p(1);
        x << xx;
        p << sol.Du1(i, u);
        StatePoint st(x, u[i], p, sol.times[kf]);
        double A = eq.aij(st)(0, 0);
        double dphi = -2.0 * (xx - x0) / (R * R);
        double d2phi = -2.0 / (R * R);
        // J4 without the K term: q(a^{ij} D_ij phi + a^k D_k phi) - 2 d3a phi
        double j4 = q * (A * d2phi + eq.a().dp(st)[0] * dphi) -
                    2.0 * delta3(eq.a(), st);
        // the two Cauchy-Schwarz remainders are bounded by mu-constants
        double theta2 = q * mu7 * mu7 / (4.0 * (q - 1.0));
        double theta1 = 1.0 - 0.5 * theta2;
        double rem = sqr(2.0 * q * std::abs(dphi)) / (4.0 * theta1) +
                     sqr(mu5) / std::max(theta1, 1e-12);
        C_fit = std::max(C_fit, (-j4 + rem) / q);
      }
    }
    out.K = C_fit;
    double T = sol.times.back();
    out.T0 = out.K > 1e-12 ? std::min(T, 1.0 / (2.0 * out.K)) : T;
  }

  // conclusion: sup over B(x0, R/2) x (0, T0] of |Du| <= 4 max{M0, t=0 sup}
  {
    double sup_inner = 0.0, sup_t0 = 0.0;
    for (int i = 0; i < nn; ++i) {
      double xx = mesh.x(i);
      if (std::abs(xx - x0) <= R)
        sup_t0 = std::max(sup_t0, std::abs(sol.Du1(i, sol.frames.front())));
    }
    for (std::size_t kf = 0; kf < sol.frames.size(); ++kf) {
      if (sol.times[kf] > out.T0 + 1e-12) break;
      for (int i = 0; i < nn; ++i) {
        double xx = mesh.x(i);
        if (std::abs(xx - x0) <= 0.5 * R)
          sup_inner =
              std::max(sup_inner, std::abs(sol.Du1(i, sol.frames[kf])));
      }
    }
    out.sup_Du_conclusion = sup_inner;
    out.rhs_bound = 4.0 * std::max(M0, sup_t0);
    AuditCheck c;
    c.id = "ETpintgradest";
    c.region = "B(x0,R/2) x (0,T0)";
    c.fitted["T0"] = out.T0;
    c.fitted["sup"] = sup_inner;
    c.fitted["bound"] = out.rhs_bound;
    c.margin = out.rhs_bound - sup_inner;
    c.pass = c.margin >= 0.0;
    out.report.checks.push_back(c);
  }
  return out;
}

}  // namespace oblab
