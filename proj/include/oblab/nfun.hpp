#pragma once

#include "oblab/boundary.hpp"
#include "oblab/common.hpp"
#include "oblab/geometry.hpp"
#include "oblab/qmc.hpp"
#include "oblab/report.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <vector>

namespace oblab {

// ---------------------------------------------------------------------------
// implicit boundary-graph function g:  0 = b(x, z, p + gamma (g - p.gamma))

struct GSolution {
  double g = 0.0;
  Vec g_x;
  double g_z = 0.0;
  Vec g_p;
  double g_t = 0.0;
  double residual = 0.0;
};

inline GSolution solve_g(const BoundaryCondition& bc, const Domain& dom,
                         const StatePoint& s, double guess = 0.0) {
  GeometryJet gj = dom.geometry_jet(s.x);
  double pg = s.p.dot(gj.gamma);
  Vec p_tan = s.p - pg * gj.gamma;
  double root =
      solve_normal_component(bc, dom, gj, s.x, s.z, p_tan, s.t, guess);
  GSolution out;
  out.g = root;
  StatePoint on_zero(s.x, s.z, p_tan + root * gj.gamma, s.t);
  FunctionJet bj = bc.jet(dom, gj, on_zero);
  out.residual = std::abs(bj.value);
  double bg = bj.dp.dot(gj.gamma);
  if (bg <= 0.0)
    throw NoConvergence("implicit function: b_p.gamma <= 0 at the root");
  // implicit differentiation:  g_p - gamma = -b_p / (b_p.gamma)
  out.g_p = gj.gamma - bj.dp / bg;
  out.g_z = -bj.dz / bg;
  out.g_t = -bj.dt / bg;
  // x-derivative picks up the gamma(x) dependence of the normal shift
  Vec bp_tilde = gj.xi_tilde(bj.dp);
  out.g_x = gj.xi_tilde(s.p) - (bj.dx + (root - pg) * bp_tilde) / bg;
  return out;
}

// ---------------------------------------------------------------------------
// mollified g and the fixed-point N

struct MollifyConfig {
  int log2_nodes = 14;
  std::uint64_t seed = 1;
  double eps_prime = 0.0;  // 0: use min{1/18, 1/(20 beta0)}
};

enum class NMode { cheap, mollified };

inline double epsilon0(const BoundaryConstants& cst) {
  double a = 0.25;
  double b = 1.0 / sqr(10.0 * (1.0 + cst.c0));
  double c = 1.0 / (36.0 * sqr(cst.beta0) * sqr(1.0 + cst.c0));
  return std::min(a, std::min(b, c));
}

struct NEvaluation {
  double N = 0.0;
  double eps = 0.0;
  double eps_prime = 0.0;
  Vec N_p;
  double N_z = 0.0;
  Vec N_x;
  double N_t = 0.0;
  double W = 0.0;
  Vec nu1;
  double v_eps = 1.0;
  double residual = 0.0;
  NMode mode = NMode::cheap;
};

class NFunction {
 public:
  NFunction(const BoundaryCondition& bc, const Domain& dom,
            BoundaryConstants cst, MollifyConfig cfg = {},
            NMode mode = NMode::cheap)
      : bc_(bc),
        dom_(dom),
        cst_(std::move(cst)),
        cfg_(cfg),
        mode_(mode),
        lattice_(2 * dom.dim() + 1, 1 << cfg.log2_nodes, cfg.seed) {
    if (cfg_.eps_prime <= 0.0)
      cfg_.eps_prime = std::min(1.0 / 18.0, 1.0 / (20.0 * cst_.beta0));
    K_ = 1.0 / (6.0 * cst_.beta0);
  }

  const BoundaryConstants& constants() const { return cst_; }
  const MollifyConfig& config() const { return cfg_; }
  NMode mode() const { return mode_; }

  double theta_x(double sigma) const {
    return 4.0 * (1.0 + cst_.c0) * cst_.beta0 / (dom_.R0() * sigma) +
           sqr(1.0 + cst_.c0) * cst_.eps_x(sigma);
  }

  struct Workspace {
    std::vector<double> roots;
    bool primed = false;
  };

  // g~(x,z,p,s): average of g over mollifier-shifted states.  The shift in
  // x scales with eps' s / (theta_x(v~) v~^2), in z with eps' s/(beta1 v~'),
  // in p with s/(6 beta0); a ratio estimator keeps the discrete mollifier
  // mass exactly one.
  double g_tilde(const Vec& x, double z, const Vec& p, double s,
                 Workspace* ws = nullptr) const {
    const int n = dom_.dim();
    const int D = 2 * n + 1;
    GeometryJet base;
    base.gamma = gamma_at(x);
    double pg = p.dot(base.gamma);
    double pt2 = p.squaredNorm() - pg * pg;
    double vt = std::sqrt(1.0 + p.squaredNorm() + s * s);
    double vtp = std::sqrt(1.0 + pt2 + s * s);
    double ax = cfg_.eps_prime * s / (theta_x(vt) * vt * vt);
    double az = cst_.beta1 > 0.0 ? cfg_.eps_prime * s / (cst_.beta1 * vtp) : 0.0;
    double ap = K_ * s;

    Workspace local;
    Workspace& w = ws ? *ws : local;
    if (w.roots.size() != static_cast<std::size_t>(lattice_.size()))
      w.roots.assign(lattice_.size(), 0.0);

    double num = 0.0, den = 0.0;
    std::vector<double> yv(D);
    Vec xs(n), ps(n), gs(n), ptan(n);
    for (int i = 0; i < lattice_.size(); ++i) {
      lattice_.point(i, yv.data());
      double r2 = 0.0;
      for (int j = 0; j < D; ++j) {
        yv[j] = 2.0 * yv[j] - 1.0;
        r2 += yv[j] * yv[j];
      }
      double wgt = bump(r2);
      if (wgt == 0.0) continue;
      for (int j = 0; j < n; ++j) xs[j] = x[j] + ax * yv[j];
      double zs = z + az * yv[n];
      for (int j = 0; j < n; ++j) ps[j] = p[j] + ap * yv[n + 1 + j];
      gamma_into(xs, gs);
      double psg = 0.0;
      for (int j = 0; j < n; ++j) psg += ps[j] * gs[j];
      double ps2 = 0.0;
      for (int j = 0; j < n; ++j) ps2 += ps[j] * ps[j];
      double pt2s = std::max(0.0, ps2 - psg * psg);
      for (int j = 0; j < n; ++j) ptan[j] = ps[j] - psg * gs[j];
      double guess = w.primed ? w.roots[i] : psg;
      double root = bc_.solve_on_line(dom_, gs, xs, zs, ptan, pt2s, 0.0, guess);
      w.roots[i] = root;
      num += root * wgt;
      den += wgt;
    }
    w.primed = true;
    if (den <= 0.0)
      throw IntegrationBudgetExceeded("no lattice nodes hit the mollifier");
    return num / den;
  }

  // fixed point p.gamma - g~(x, z, p, eps^{1/2} N) = N
  NEvaluation solve(const StatePoint& st, double eps,
                    Workspace* ws = nullptr) const {
    NEvaluation out;
    out.eps = eps;
    out.eps_prime = cfg_.eps_prime;
    out.mode = mode_;
    GeometryJet gj = dom_.geometry_jet(st.x);
    double pg = st.p.dot(gj.gamma);
    Vec p_tan = st.p - pg * gj.gamma;
    double pt2 = p_tan.squaredNorm();
    out.v_eps = std::sqrt(1.0 + pt2 + eps * pg * pg);

    if (mode_ == NMode::cheap) {
      GSolution g = solve_g(bc_, dom_, st, pg);
      out.N = pg - g.g;
      out.N_p = gj.gamma - g.g_p;
      out.N_z = -g.g_z;
      out.N_x = gj.xi_tilde(st.p) - g.g_x;
      out.N_t = -g.g_t;
      out.residual = g.residual;
    } else {
      Workspace local;
      Workspace& w = ws ? *ws : local;
      double se = std::sqrt(eps);
      // start from the unmollified value
      double g0 = solve_normal_component(bc_, dom_, gj, st.x, st.z, p_tan,
                                         st.t, pg);
      double N = pg - g0;
      double f_prev = 0.0, N_prev = 0.0;
      bool have_prev = false;
      for (int it = 0; it < 60; ++it) {
        double f = pg - g_tilde(st.x, st.z, st.p, se * N, &w) - N;
        if (std::abs(f) < 1e-13) {
          out.residual = std::abs(f);
          break;
        }
        double step;
        if (have_prev && std::abs(f - f_prev) > 1e-300) {
          step = -f * (N - N_prev) / (f - f_prev);  // secant
          if (std::abs(step) > 2.0 * std::abs(f) + 1e-12) step = f;
        } else {
          step = f;  // plain fixed-point move: N <- Phi(N)
        }
        N_prev = N;
        f_prev = f;
        have_prev = true;
        N += step;
        out.residual = std::abs(f);
        if (it == 59)
          throw ContractionFailure("fixed point failed to contract");
      }
      out.N = N;
      // implicit differentiation with difference quotients of g~
      double se_N = se * N;
      double hs = 1e-5 * (1.0 + std::abs(se_N));
      double gt_s =
          (g_tilde(st.x, st.z, st.p, se_N + hs, &w) -
           g_tilde(st.x, st.z, st.p, se_N - hs, &w)) /
          (2.0 * hs);
      if (std::abs(gt_s) > 0.5 + 0.1)
        throw ContractionFailure("|g~_s| > 1/2: mollification config invalid");
      double denom = 1.0 + se * gt_s;
      int n = dom_.dim();
      out.N_p = Vec(n);
      out.N_x = Vec(n);
      for (int i = 0; i < n; ++i) {
        double hp = 1e-5 * (1.0 + st.p.norm());
        Vec pp = st.p, pm = st.p;
        pp[i] += hp;
        pm[i] -= hp;
        double d = (g_tilde(st.x, st.z, pp, se_N, &w) -
                    g_tilde(st.x, st.z, pm, se_N, &w)) /
                   (2.0 * hp);
        out.N_p[i] = (gj.gamma[i] - d) / denom;
        double hx = 1e-6 * (1.0 + st.x.norm());
        Vec xp = st.x, xm = st.x;
        xp[i] += hx;
        xm[i] -= hx;
        double gp = gamma_at(xp).dot(st.p), gm = gamma_at(xm).dot(st.p);
        double dx = (g_tilde(xp, st.z, st.p, se_N, &w) -
                     g_tilde(xm, st.z, st.p, se_N, &w)) /
                    (2.0 * hx);
        out.N_x[i] = ((gp - gm) / (2.0 * hx) - dx) / denom;
      }
      if (cst_.beta1 > 0.0) {
        double hz = 1e-5 * (1.0 + std::abs(st.z));
        double d = (g_tilde(st.x, st.z + hz, st.p, se_N, &w) -
                    g_tilde(st.x, st.z - hz, st.p, se_N, &w)) /
                   (2.0 * hz);
        out.N_z = -d / denom;
      }
    }
    out.W = pt2 + eps * out.N * out.N;
    out.nu1 = p_tan + eps * out.N * out.N_p;
    return out;
  }

  // second derivative of N in p along directions (k,m) by central FD on N
  double N_pp(const StatePoint& st, double eps, int k, int m,
              Workspace* ws = nullptr) const {
    double hk = 1e-4 * (1.0 + st.p.norm());
    double hm = hk;
    auto Nof = [&](double dk, double dm) {
      StatePoint s2 = st;
      s2.p[k] += dk;
      s2.p[m] += dm;
      return solve(s2, eps, ws).N;
    };
    if (k == m) {
      double c = solve(st, eps, ws).N;
      return (Nof(hk, 0) - 2.0 * c + Nof(-hk, 0)) / (hk * hk);
    }
    return (Nof(hk, hm) - Nof(hk, -hm) - Nof(-hk, hm) + Nof(-hk, -hm)) /
           (4.0 * hk * hm);
  }

  Vec gamma_at(const Vec& x) const {
    Vec g(dom_.dim());
    gamma_into(x, g);
    return g;
  }

  void gamma_into(const Vec& x, Vec& out) const {
    switch (dom_.kind()) {
      case DomainKind::interval:
        out[0] = (x[0] - dom_.interval_a() < dom_.interval_b() - x[0]) ? 1.0
                                                                       : -1.0;
        return;
      case DomainKind::disk: {
        double r = x.norm();
        out = -x / r;
        return;
      }
      case DomainKind::annulus: {
        double r = x.norm();
        double sign = (r - dom_.interval_a() < dom_.interval_b() - r) ? 1.0
                                                                      : -1.0;
        out = sign * x / r;
        return;
      }
      default:
        out = dom_.geometry_jet(x).gamma;
        return;
    }
  }

 private:
  const BoundaryCondition& bc_;
  const Domain& dom_;
  BoundaryConstants cst_;
  MollifyConfig cfg_;
  NMode mode_;
  Rank1Lattice lattice_;
  double K_ = 1.0;
};

inline NEvaluation solve_N(const BoundaryCondition& bc, const Domain& dom,
                           const BoundaryConstants& cst, const StatePoint& s,
                           double eps, NMode mode = NMode::cheap,
                           const MollifyConfig& cfg = {}) {
  NFunction nf(bc, dom, cst, cfg, mode);
  return nf.solve(s, eps);
}

// ---------------------------------------------------------------------------
// property audit for the N machinery

struct NAuditPlan {
  int n_states = 200;       // first-order conditions
  int n_second = 40;        // states for FD second-derivative conditions
  int n_xi = 16;            // directions per quadratic-form condition
  int n_sigma0 = 64;        // zero-set states for the N=0 check
  double radius_lo = 1.5;
  double radius_hi = 50.0;
  double z_range = 1.0;
  double fd_pad = 0.05;     // padding of (E10.37a) for FD error
  std::uint64_t seed = 7;
};

// deterministic collar states: boundary anchor pulled inward, random
// gradient with log-spaced radius
inline std::vector<StatePoint> sample_collar_states(const Domain& dom, int n,
                                                    double radius_lo,
                                                    double radius_hi,
                                                    double z_range,
                                                    std::uint64_t seed) {
  std::vector<StatePoint> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto anchors = dom.boundary_points(std::max(8, n / 8));
  int na = static_cast<int>(anchors.size());
  for (int i = 0; i < n; ++i) {
    const Vec& xb = anchors[i % na];
    GeometryJet gj = dom.geometry_jet(xb);
    double depth = uni(rng) * 0.24 * dom.R0();
    Vec x = xb + depth * gj.gamma;
    double z = z_range * (2.0 * uni(rng) - 1.0);
    Vec dir(dom.dim());
    for (int k = 0; k < dom.dim(); ++k) dir[k] = gauss(rng);
    if (dir.norm() < 1e-12) dir[0] = 1.0;
    double r = radius_lo * std::pow(radius_hi / radius_lo, uni(rng));
    out.emplace_back(x, z, (r * dir / dir.norm()).eval(), 0.0);
  }
  return out;
}

inline ConditionReport n_property_audit(const BoundaryCondition& bc,
                                        const Domain& dom,
                                        const BoundaryConstants& cst,
                                        const std::vector<double>& eps_list,
                                        const NAuditPlan& plan,
                                        NMode mode = NMode::mollified,
                                        const MollifyConfig& cfg = {}) {
  ConditionReport rep;
  NFunction nf(bc, dom, cst, cfg, mode);
  NFunction::Workspace ws;
  auto states = sample_collar_states(dom, plan.n_states, plan.radius_lo,
                                     plan.radius_hi, plan.z_range, plan.seed);
  double c0 = cst.c0, beta0 = cst.beta0, beta1 = cst.beta1;
  double R0 = dom.R0();

  for (double eps : eps_list) {
    MarginTracker t37a_lo, t37a_hi, t37b, t37c, t37d, tdot, t41a, twnu, tres;
    double sandwich_fit = 0.0;
    StatePoint sandwich_witness;
    for (const auto& st : states) {
      NEvaluation ev = nf.solve(st, eps, &ws);
      GeometryJet gj = dom.geometry_jet(st.x);
      double npg = ev.N_p.dot(gj.gamma);
      double v = std::sqrt(1.0 + st.p.squaredNorm());
      tres.update(1e-12 - ev.residual, st, eps);
      t37a_lo.update(npg - (0.5 - plan.fd_pad), st, eps);
      t37a_hi.update((1.5 + plan.fd_pad) - npg, st, eps);
      t37b.update(3.0 * beta0 - ev.N_p.norm(), st, eps);
      t37c.update(4.0 * (1.0 + c0) * beta1 * ev.v_eps - std::abs(ev.N_z), st,
                  eps);
      double rhs37d = 55.0 * (1.0 + c0) * beta0 / R0 * v +
                      12.0 * sqr(1.0 + c0) * cst.eps_x(v) * v * v;
      t37d.update(rhs37d - ev.N_x.norm(), st, eps);
      tdot.update(6.0 * beta0 * sqr(1.0 + c0) * ev.v_eps -
                      std::abs(ev.N - ev.N_p.dot(st.p)),
                  st, eps);
      t41a.update(2.0 * ev.v_eps - ev.nu1.norm(), st, eps);
      twnu.update(12.0 * std::pow(1.0 + c0, 3) * beta0 * std::sqrt(eps) *
                          sqr(ev.v_eps) -
                      std::abs(ev.W - st.p.dot(ev.nu1)),
                  st, eps);
      double dev = std::abs(1.0 + ev.W - sqr(ev.v_eps)) /
                   (std::sqrt(eps) * sqr(ev.v_eps));
      if (dev > sandwich_fit) {
        sandwich_fit = dev;
        sandwich_witness = st;
      }
    }
    std::string tag = "@eps=" + fmt_g(eps);
    auto push = [&](MarginTracker& t, const std::string& id) {
      auto r = t.result(id, 1e-9);
      r.eps = eps;
      rep.add(r);
    };
    push(tres, "N-residual");
    push(t37a_lo, "E10.37a-lower");
    push(t37a_hi, "E10.37a-upper");
    push(t37b, "E10.37b");
    push(t37c, "E10.37c");
    push(t37d, "E10.37d");
    push(tdot, "E10.372dot");
    push(t41a, "E10.41a");
    push(twnu, "EWnu1");
    {
      ConditionResult r;
      r.id = "E10.39";
      r.eps = eps;
      r.fitted["c_sandwich"] = sandwich_fit;
      r.fitted["bound"] = 8.0 * sqr(1.0 + c0);
      r.pass = sandwich_fit <= 8.0 * sqr(1.0 + c0);
      r.margin = 8.0 * sqr(1.0 + c0) - sandwich_fit;
      r.witness = sandwich_witness;
      rep.add(r);
    }

    // N = 0 on the zero set of b (v large)
    {
      SamplePlan sp;
      sp.n_boundary = plan.n_sigma0;
      sp.n_z = 3;
      sp.z_range = plan.z_range;
      sp.n_dir = 2;
      sp.radii = {plan.radius_hi};
      sp.seed = derive_seed(plan.seed, "nzero");
      MarginTracker tz;
      double vmin = std::sqrt(1.0 + sqr(cst.c0)) * cst.tau0;
      for (const auto& rec : sample_sigma0(bc, dom, sp, vmin)) {
        NEvaluation ev = nf.solve(rec.state, eps, &ws);
        tz.update(1e-8 - std::abs(ev.N), rec.state, eps);
      }
      auto r = tz.result("N-zero-on-Sigma0", 0.0);
      r.eps = eps;
      rep.add(r);
    }

    // second-derivative conditions with fitted constants
    {
      std::mt19937_64 rng(derive_seed(plan.seed, "xi"));
      std::normal_distribution<double> gauss(0.0, 1.0);
      double c1_pp = 0.0, c1_43 = 0.0;
      double worst_43 = std::numeric_limits<double>::infinity();
      StatePoint w43;
      int n = dom.dim();
      int count = 0;
      for (const auto& st : states) {
        if (++count > plan.n_second) break;
        NEvaluation ev = nf.solve(st, eps, &ws);
        GeometryJet gj = dom.geometry_jet(st.x);
        Mat Npp(n, n);
        for (int k = 0; k < n; ++k)
          for (int m = k; m < n; ++m) {
            double d = nf.N_pp(st, eps, k, m, &ws);
            Npp(k, m) = d;
            Npp(m, k) = d;
          }
        for (int j = 0; j < plan.n_xi; ++j) {
          Vec xi(n);
          for (int k = 0; k < n; ++k) xi[k] = gauss(rng);
          double xig = xi.dot(gj.gamma);
          Vec xit = xi - xig * gj.gamma;
          double xit2 = xit.squaredNorm();
          double lhs_pp = std::abs(ev.N * xi.dot(Npp * xi));
          if (xit2 > 1e-14) {
            double c = (lhs_pp - 0.25 * xig * xig) * std::sqrt(eps) / xit2;
            c1_pp = std::max(c1_pp, c);
          }
          // quadratic form of (E10.43)
          double q = xi.dot((gj.proj + eps * ev.N * Npp +
                             eps * ev.N_p * ev.N_p.transpose()) *
                            xi);
          double rhs = xit2 + 0.5 * eps * xig * xig;
          if (xit2 > 1e-14) {
            double c = (rhs - q) / (std::sqrt(eps) * xit2);
            c1_43 = std::max(c1_43, std::max(0.0, c));
          }
          double slack = q - (1.0 - c1_43 * std::sqrt(eps)) * xit2 -
                         0.5 * eps * xig * xig;
          if (slack < worst_43) {
            worst_43 = slack;
            w43 = st;
          }
        }
      }
      ConditionResult rpp;
      rpp.id = "E10.372pp";
      rpp.eps = eps;
      rpp.fitted["c1"] = c1_pp;
      rpp.pass = std::isfinite(c1_pp);
      rpp.margin = 0.0;
      rep.add(rpp);
      ConditionResult r43;
      r43.id = "E10.43";
      r43.eps = eps;
      r43.fitted["c1"] = c1_43;
      r43.pass = worst_43 >= -1e-9;
      r43.margin = worst_43;
      r43.witness = w43;
      rep.add(r43);
    }
  }
  return rep;
}

}  // namespace oblab
