#pragma once

#include "oblab/boundary.hpp"
#include "oblab/common.hpp"
#include "oblab/geometry.hpp"
#include "oblab/nfun.hpp"
#include "oblab/report.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace oblab {

// ---------------------------------------------------------------------------
// scalar coefficient a(x, z, p) with jets

class ScalarCoefficient {
 public:
  virtual ~ScalarCoefficient() = default;
  virtual double value(const StatePoint& s) const = 0;
  virtual Vec dp(const StatePoint& s) const {
    int n = s.dim();
    Vec g(n);
    double h = 1e-6 * (1.0 + s.p.norm());
    for (int i = 0; i < n; ++i) {
      StatePoint sp = s, sm = s;
      sp.p[i] += h;
      sm.p[i] -= h;
      g[i] = (value(sp) - value(sm)) / (2.0 * h);
    }
    return g;
  }
  virtual double dz(const StatePoint& s) const {
    double h = 1e-6 * (1.0 + std::abs(s.z));
    StatePoint sp = s, sm = s;
    sp.z += h;
    sm.z -= h;
    return (value(sp) - value(sm)) / (2.0 * h);
  }
  virtual Vec dx(const StatePoint& s) const {
    int n = s.dim();
    Vec g(n);
    double h = 1e-6 * (1.0 + s.x.norm());
    for (int i = 0; i < n; ++i) {
      StatePoint sp = s, sm = s;
      sp.x[i] += h;
      sm.x[i] -= h;
      g[i] = (value(sp) - value(sm)) / (2.0 * h);
    }
    return g;
  }
};

class ZeroScalar : public ScalarCoefficient {
 public:
  double value(const StatePoint&) const override { return 0.0; }
  Vec dp(const StatePoint& s) const override { return Vec::Zero(s.dim()); }
  double dz(const StatePoint&) const override { return 0.0; }
  Vec dx(const StatePoint& s) const override { return Vec::Zero(s.dim()); }
};

// a = coeff * |p|^q
class PowerScalar : public ScalarCoefficient {
 public:
  PowerScalar(double coeff, double q) : c_(coeff), q_(q) {}
  double value(const StatePoint& s) const override {
    return c_ * std::pow(s.p.norm(), q_);
  }
  Vec dp(const StatePoint& s) const override {
    double r = s.p.norm();
    if (r == 0.0) return Vec::Zero(s.dim());
    return c_ * q_ * std::pow(r, q_ - 2.0) * s.p;
  }
  double dz(const StatePoint&) const override { return 0.0; }
  Vec dx(const StatePoint& s) const override { return Vec::Zero(s.dim()); }
  double coeff() const { return c_; }
  double exponent() const { return q_; }

 private:
  double c_, q_;
};

// a = v H(x, z)
class VHScalar : public ScalarCoefficient {
 public:
  explicit VHScalar(ScalarField H) : H_(std::move(H)) {}
  double value(const StatePoint& s) const override {
    return std::sqrt(1.0 + s.p.squaredNorm()) * H_(s.x, s.z, s.t);
  }
  Vec dp(const StatePoint& s) const override {
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    return (H_(s.x, s.z, s.t) / v) * s.p;
  }
  double dz(const StatePoint& s) const override {
    return std::sqrt(1.0 + s.p.squaredNorm()) * H_.grad_z(s.x, s.z, s.t);
  }
  Vec dx(const StatePoint& s) const override {
    return std::sqrt(1.0 + s.p.squaredNorm()) * H_.grad_x(s.x, s.z, s.t);
  }
  const ScalarField& H() const { return H_; }

 private:
  ScalarField H_;
};

// ---------------------------------------------------------------------------
// equation coefficients a^{ij}, a with jets

class EquationCoefficients {
 public:
  virtual ~EquationCoefficients() = default;
  virtual std::string family() const = 0;
  virtual bool parabolic() const { return false; }

  virtual Mat aij(const StatePoint& s) const = 0;
  // aij_p(s)[k](i,j) = d a^{ij} / d p_k
  virtual std::vector<Mat> aij_p(const StatePoint& s) const {
    int n = s.dim();
    std::vector<Mat> out(n);
    double h = 1e-6 * (1.0 + s.p.norm());
    for (int k = 0; k < n; ++k) {
      StatePoint sp = s, sm = s;
      sp.p[k] += h;
      sm.p[k] -= h;
      out[k] = (aij(sp) - aij(sm)) / (2.0 * h);
    }
    return out;
  }
  virtual Mat aij_z(const StatePoint& s) const {
    double h = 1e-6 * (1.0 + std::abs(s.z));
    StatePoint sp = s, sm = s;
    sp.z += h;
    sm.z -= h;
    return (aij(sp) - aij(sm)) / (2.0 * h);
  }
  virtual std::vector<Mat> aij_x(const StatePoint& s) const {
    int n = s.dim();
    std::vector<Mat> out(n);
    double h = 1e-6 * (1.0 + s.x.norm());
    for (int k = 0; k < n; ++k) {
      StatePoint sp = s, sm = s;
      sp.x[k] += h;
      sm.x[k] -= h;
      out[k] = (aij(sp) - aij(sm)) / (2.0 * h);
    }
    return out;
  }

  const ScalarCoefficient& a() const { return *a_; }

  double E(const StatePoint& s) const { return s.p.dot(aij(s) * s.p); }
  double Lambda(const StatePoint& s) const {
    Eigen::SelfAdjointEigenSolver<Mat> es(aij(s));
    return es.eigenvalues().maxCoeff();
  }
  double lambda_min(const StatePoint& s) const {
    Eigen::SelfAdjointEigenSolver<Mat> es(aij(s));
    return es.eigenvalues().minCoeff();
  }

  Mat delta1_aij(const StatePoint& s) const {
    auto dp = aij_p(s);
    Mat out = Mat::Zero(s.dim(), s.dim());
    for (int k = 0; k < s.dim(); ++k) out += s.p[k] * dp[k];
    return out;
  }
  // E_p^i = a^{jk,i} p_j p_k + 2 a^{ik} p_k
  Vec E_p(const StatePoint& s) const {
    auto dp = aij_p(s);
    Vec out = 2.0 * (aij(s) * s.p);
    for (int k = 0; k < s.dim(); ++k) out[k] += s.p.dot(dp[k] * s.p);
    return out;
  }
  double E_z(const StatePoint& s) const { return s.p.dot(aij_z(s) * s.p); }
  Vec E_x(const StatePoint& s) const {
    auto dx = aij_x(s);
    Vec out(s.dim());
    for (int k = 0; k < s.dim(); ++k) out[k] = s.p.dot(dx[k] * s.p);
    return out;
  }

 protected:
  std::shared_ptr<const ScalarCoefficient> a_ = std::make_shared<ZeroScalar>();
};

// false mean curvature operator: a^{ij} = delta^{ij} + p_i p_j
class FmceEq : public EquationCoefficients {
 public:
  explicit FmceEq(std::shared_ptr<const ScalarCoefficient> a = nullptr) {
    if (a) a_ = std::move(a);
  }
  std::string family() const override { return "fmce"; }
  Mat aij(const StatePoint& s) const override {
    int n = s.dim();
    return Mat::Identity(n, n) + s.p * s.p.transpose();
  }
  std::vector<Mat> aij_p(const StatePoint& s) const override {
    int n = s.dim();
    std::vector<Mat> out(n, Mat::Zero(n, n));
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        out[k](k, j) += s.p[j];
        out[k](j, k) += s.p[j];
      }
    }
    return out;
  }
  Mat aij_z(const StatePoint& s) const override {
    return Mat::Zero(s.dim(), s.dim());
  }
  std::vector<Mat> aij_x(const StatePoint& s) const override {
    return std::vector<Mat>(s.dim(), Mat::Zero(s.dim(), s.dim()));
  }
};

// a^{ij} = a*^{ij}(v) + tau(v) p_i p_j with scalar radial profiles
class GeneralizedFmceEq : public EquationCoefficients {
 public:
  GeneralizedFmceEq(std::function<double(double)> lambda_star,
                    std::function<double(double)> dlambda_star,
                    std::function<double(double)> tau,
                    std::function<double(double)> dtau,
                    std::shared_ptr<const ScalarCoefficient> a = nullptr)
      : ls_(std::move(lambda_star)),
        dls_(std::move(dlambda_star)),
        tau_(std::move(tau)),
        dtau_(std::move(dtau)) {
    if (a) a_ = std::move(a);
  }
  std::string family() const override { return "generalized_fmce"; }
  double tau(const StatePoint& s) const {
    return tau_(std::sqrt(1.0 + s.p.squaredNorm()));
  }
  double delta1_tau(const StatePoint& s) const {
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    return dtau_(v) * s.p.squaredNorm() / v;
  }
  Mat aij(const StatePoint& s) const override {
    int n = s.dim();
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    return ls_(v) * Mat::Identity(n, n) + tau_(v) * s.p * s.p.transpose();
  }
  std::vector<Mat> aij_p(const StatePoint& s) const override {
    int n = s.dim();
    double v = std::sqrt(1.0 + s.p.squaredNorm());
    std::vector<Mat> out(n);
    for (int k = 0; k < n; ++k) {
      out[k] = (dls_(v) * s.p[k] / v) * Mat::Identity(n, n) +
               (dtau_(v) * s.p[k] / v) * s.p * s.p.transpose();
      for (int j = 0; j < n; ++j) {
        out[k](k, j) += tau_(v) * s.p[j];
        out[k](j, k) += tau_(v) * s.p[j];
      }
    }
    return out;
  }
  Mat aij_z(const StatePoint& s) const override {
    return Mat::Zero(s.dim(), s.dim());
  }
  std::vector<Mat> aij_x(const StatePoint& s) const override {
    return std::vector<Mat>(s.dim(), Mat::Zero(s.dim(), s.dim()));
  }

 private:
  std::function<double(double)> ls_, dls_, tau_, dtau_;
};

class UniformlyEllipticEq : public EquationCoefficients {
 public:
  explicit UniformlyEllipticEq(
      std::shared_ptr<const ScalarCoefficient> a = nullptr) {
    if (a) a_ = std::move(a);
  }
  std::string family() const override { return "uniformly_elliptic"; }
  Mat aij(const StatePoint& s) const override {
    return Mat::Identity(s.dim(), s.dim());
  }
  std::vector<Mat> aij_p(const StatePoint& s) const override {
    return std::vector<Mat>(s.dim(), Mat::Zero(s.dim(), s.dim()));
  }
  Mat aij_z(const StatePoint& s) const override {
    return Mat::Zero(s.dim(), s.dim());
  }
  std::vector<Mat> aij_x(const StatePoint& s) const override {
    return std::vector<Mat>(s.dim(), Mat::Zero(s.dim(), s.dim()));
  }
};

// a^{ij} = h1(v) g^{ij}(p), a = v H(X, z)
class CapillaryParabolicEq : public EquationCoefficients {
 public:
  CapillaryParabolicEq(std::function<double(double)> h1,
                       std::function<double(double)> dh1, ScalarField H)
      : h1_(std::move(h1)), dh1_(std::move(dh1)) {
    a_ = std::make_shared<VHScalar>(std::move(H));
  }
  std::string family() const override { return "capillary_parabolic"; }
  bool parabolic() const override { return true; }
  double h1(double v) const { return h1_(v); }
  double dh1(double v) const { return dh1_(v); }

  Mat aij(const StatePoint& s) const override {
    int n = s.dim();
    double v2 = 1.0 + s.p.squaredNorm();
    return h1_(std::sqrt(v2)) *
           (Mat::Identity(n, n) - s.p * s.p.transpose() / v2);
  }
  std::vector<Mat> aij_p(const StatePoint& s) const override {
    int n = s.dim();
    double v2 = 1.0 + s.p.squaredNorm();
    double v = std::sqrt(v2);
    Mat g = Mat::Identity(n, n) - s.p * s.p.transpose() / v2;
    std::vector<Mat> out(n);
    for (int k = 0; k < n; ++k) {
      out[k] = (dh1_(v) * s.p[k] / v) * g;
      Mat dg = Mat::Zero(n, n);
      for (int j = 0; j < n; ++j) {
        dg(k, j) -= s.p[j] / v2;
        dg(j, k) -= s.p[j] / v2;
      }
      dg += 2.0 * s.p[k] / (v2 * v2) * s.p * s.p.transpose();
      out[k] += h1_(v) * dg;
    }
    return out;
  }
  Mat aij_z(const StatePoint& s) const override {
    return Mat::Zero(s.dim(), s.dim());
  }
  std::vector<Mat> aij_x(const StatePoint& s) const override {
    return std::vector<Mat>(s.dim(), Mat::Zero(s.dim(), s.dim()));
  }

 private:
  std::function<double(double)> h1_, dh1_;
};

// sup_sigma |h1'(sigma)| sigma^2 / sqrt(h1) must stay bounded
inline void check_h1_growth(const std::function<double(double)>& h1,
                            const std::function<double(double)>& dh1,
                            double sigma_max = 1e4) {
  auto ratio = [&](double s) {
    return std::abs(dh1(s)) * s * s / std::sqrt(h1(s));
  };
  double r1 = ratio(sigma_max / 10.0), r2 = ratio(sigma_max);
  if (r1 > 1e-14) {
    double slope = std::log(r2 / r1) / std::log(10.0);
    if (slope > 0.05)
      throw HypothesisViolation(
          "|h1'| sigma^2 / sqrt(h1) grows (slope " + std::to_string(slope) +
          " at sigma=" + std::to_string(sigma_max) + ")");
  }
}

// ---------------------------------------------------------------------------
// delta operators and the A/B/B'/C functionals

struct Multipliers {
  std::function<double(const StatePoint&)> r =
      [](const StatePoint&) { return 0.0; };
  std::function<double(const StatePoint&)> s =
      [](const StatePoint&) { return 0.0; };

  static Multipliers constants(double rv, double sv) {
    Multipliers m;
    m.r = [rv](const StatePoint&) { return rv; };
    m.s = [sv](const StatePoint&) { return sv; };
    return m;
  }
};

// catalog presets: fmce (-3, 0), generalized fmce (-(delta_1+3)tau/tau, 0),
// uniformly elliptic (-1, 0), parabolic (-1, 0)
inline Multipliers preset_multipliers(const EquationCoefficients& eq) {
  if (eq.parabolic()) return Multipliers::constants(-1.0, 0.0);
  if (eq.family() == "fmce") return Multipliers::constants(-3.0, 0.0);
  if (eq.family() == "uniformly_elliptic")
    return Multipliers::constants(-1.0, 0.0);
  if (const auto* g = dynamic_cast<const GeneralizedFmceEq*>(&eq)) {
    Multipliers m;
    m.r = [g](const StatePoint& st) {
      return -(g->delta1_tau(st) + 3.0 * g->tau(st)) / g->tau(st);
    };
    m.s = [](const StatePoint&) { return 0.0; };
    return m;
  }
  return Multipliers::constants(-1.0, 0.0);
}

using Nu1Provider = std::function<Vec(const StatePoint&, double)>;

// cheap-mode nu1 = p' + eps N (gamma - g_p)
inline Nu1Provider cheap_nu1(const BoundaryCondition& bc, const Domain& dom) {
  return [&bc, &dom](const StatePoint& s, double eps) -> Vec {
    GSolution g = solve_g(bc, dom, s);
    GeometryJet gj = dom.geometry_jet(s.x);
    double pg = s.p.dot(gj.gamma);
    Vec p_tan = s.p - pg * gj.gamma;
    double N = pg - g.g;
    return p_tan + eps * N * (gj.gamma - g.g_p);
  };
}

inline double delta1(const ScalarCoefficient& f, const StatePoint& s) {
  return s.p.dot(f.dp(s));
}

inline double delta2(const ScalarCoefficient& f, const StatePoint& s,
                     const Vec& nu1) {
  double den = s.p.dot(nu1);
  if (std::abs(den) < 1e-12 * (1.0 + s.p.norm() * nu1.norm()))
    throw DegenerateDenominator("p.nu1 ~ 0 in delta_2");
  return f.dz(s) + f.dx(s).dot(nu1) / den;
}

inline double delta3(const ScalarCoefficient& f, const StatePoint& s) {
  double r = s.p.norm();
  if (r < 1e-300) return f.dz(s);
  return f.dz(s) + f.dx(s).dot(s.p) / r;
}

struct StructureFunctionals {
  double E = 0.0;
  double Lambda = 0.0;
  double lambda_min = 0.0;
  double A = 0.0;
  double B = 0.0;
  double Bprime = 0.0;
  double C = 0.0;
};

inline StructureFunctionals abc_values(const EquationCoefficients& eq,
                                       const StatePoint& s,
                                       const Multipliers& mult,
                                       const Vec& nu1) {
  StructureFunctionals out;
  out.E = eq.E(s);
  if (out.E <= 0.0) throw DegenerateDenominator("E <= 0 in abc_values");
  out.Lambda = eq.Lambda(s);
  out.lambda_min = eq.lambda_min(s);
  double r = mult.r(s), sm = mult.s(s);
  double d1E = s.p.dot(eq.E_p(s));
  double aval = eq.a().value(s);
  double d1a = delta1(eq.a(), s);
  double den = s.p.dot(nu1);
  if (std::abs(den) < 1e-12 * (1.0 + s.p.norm() * nu1.norm()))
    throw DegenerateDenominator("p.nu1 ~ 0 in abc_values");
  double d2E = eq.E_z(s) + eq.E_x(s).dot(nu1) / den;
  double d2a = eq.a().dz(s) + eq.a().dx(s).dot(nu1) / den;
  out.A = (d1E + r * out.E) / out.E;
  out.Bprime = (d1a + r * aval) / out.E;
  out.B = (d1a + r * aval + d2E + sm * out.E) / out.E;
  out.C = (d2a + sm * aval) / out.E;
  return out;
}

// ---------------------------------------------------------------------------
// limsup estimation over |p| -> infinity

enum class TailVerdict { converges_to_zero, stabilized, diverges, oscillates };

inline std::string to_string(TailVerdict v) {
  switch (v) {
    case TailVerdict::converges_to_zero: return "converges_to_zero";
    case TailVerdict::stabilized: return "stabilized";
    case TailVerdict::diverges: return "diverges";
    case TailVerdict::oscillates: return "oscillates";
  }
  return "?";
}

struct LimitEstimate {
  std::vector<double> radii;
  std::vector<double> sups;
  TailVerdict verdict = TailVerdict::stabilized;
  double limit = 0.0;  // estimate at the largest radius (0 when -> 0)
  bool converges() const {
    return verdict == TailVerdict::converges_to_zero ||
           verdict == TailVerdict::stabilized;
  }
};

namespace detail {

inline LimitEstimate classify_tail(std::vector<double> radii,
                                   std::vector<double> sups, bool absolute) {
  LimitEstimate est;
  est.radii = std::move(radii);
  est.sups = std::move(sups);
  std::size_t n = est.sups.size();
  auto mag = [&](std::size_t i) {
    return absolute ? std::abs(est.sups[i]) : est.sups[i];
  };
  double last = mag(n - 1), prev = mag(n - 2);
  if (std::abs(last) < 1e-12 && std::abs(prev) < 1e-12) {
    est.verdict = TailVerdict::converges_to_zero;
    est.limit = 0.0;
    return est;
  }
  double slope;
  if (std::abs(prev) < 1e-300) {
    slope = last > prev ? 1.0 : -1.0;
  } else {
    slope = std::log(std::abs(last) / std::abs(prev)) /
            std::log(est.radii[n - 1] / est.radii[n - 2]);
  }
  // oscillation: alternating increments with non-shrinking magnitude
  if (n >= 4) {
    double d1 = mag(n - 3) - mag(n - 4);
    double d2 = mag(n - 2) - mag(n - 3);
    double d3 = mag(n - 1) - mag(n - 2);
    if (d1 * d2 < 0 && d2 * d3 < 0 &&
        std::abs(d3) > 0.5 * std::abs(d1) &&
        std::abs(d3) > 0.05 * (std::abs(last) + 1e-30)) {
      est.verdict = TailVerdict::oscillates;
      est.limit = est.sups[n - 1];
      return est;
    }
  }
  if (slope < -0.1) {
    est.verdict = TailVerdict::converges_to_zero;
    est.limit = 0.0;
  } else if (slope > 0.1) {
    est.verdict = TailVerdict::diverges;
    est.limit = est.sups[n - 1];
  } else {
    est.verdict = TailVerdict::stabilized;
    est.limit = est.sups[n - 1];
  }
  return est;
}

}  // namespace detail

struct LimitEstimates {
  // per epsilon (key formatted), each quantity's tail estimate
  std::map<std::string, LimitEstimate> A, Aprime, B, Bprime, C;
  std::vector<double> eps_list;
};

struct LimitPlan {
  std::vector<double> radii = {10.0, 100.0, 1000.0, 10000.0};
  int n_dir = 12;
  int n_x = 6;
  int n_z = 3;
  double z_range = 1.0;
  std::uint64_t seed = 5;
};

inline LimitEstimates limit_estimates(const EquationCoefficients& eq,
                                      const BoundaryCondition& bc,
                                      const Domain& dom, const LimitPlan& plan,
                                      const Multipliers& mult,
                                      const std::vector<double>& eps_list,
                                      Nu1Provider nu1 = {}) {
  if (!nu1) nu1 = cheap_nu1(bc, dom);
  LimitEstimates out;
  out.eps_list = eps_list;
  std::mt19937_64 rng(derive_seed(plan.seed, "limits"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto anchors = dom.boundary_points(plan.n_x);
  for (double eps : eps_list) {
    std::vector<double> supA, supAp, supB, supBp, supC;
    for (double r : plan.radii) {
      double sa = -1e300, sap = 0.0, sb = -1e300, sbp = 0.0, sc = -1e300;
      for (const Vec& xb : anchors) {
        GeometryJet gj = dom.geometry_jet(xb);
        Vec x = xb + 0.1 * dom.R0() * gj.gamma;
        for (int iz = 0; iz < plan.n_z; ++iz) {
          double z = plan.n_z == 1 ? 0.0
                                   : -plan.z_range + 2.0 * plan.z_range * iz /
                                                         (plan.n_z - 1);
          for (int id = 0; id < plan.n_dir; ++id) {
            Vec dir(dom.dim());
            for (int k = 0; k < dom.dim(); ++k) dir[k] = gauss(rng);
            if (dir.norm() < 1e-12) continue;
            StatePoint st(x, z, (r * dir / dir.norm()).eval(), 0.0);
            try {
              Vec n1 = nu1(st, eps);
              auto f = abc_values(eq, st, mult, n1);
              sa = std::max(sa, f.A);
              sap = std::max(sap, std::abs(f.A));
              sb = std::max(sb, f.B);
              sbp = std::max(sbp, std::abs(f.Bprime));
              sc = std::max(sc, f.C);
            } catch (const DegenerateDenominator&) {
              continue;  // reported by the audit layer; skip in sweeps
            }
          }
        }
      }
      supA.push_back(sa);
      supAp.push_back(sap);
      supB.push_back(sb);
      supBp.push_back(sbp);
      supC.push_back(sc);
    }
    std::string key = fmt_g(eps);
    out.A[key] = detail::classify_tail(plan.radii, supA, false);
    out.Aprime[key] = detail::classify_tail(plan.radii, supAp, true);
    out.B[key] = detail::classify_tail(plan.radii, supB, false);
    out.Bprime[key] = detail::classify_tail(plan.radii, supBp, true);
    out.C[key] = detail::classify_tail(plan.radii, supC, false);
  }
  return out;
}

// ---------------------------------------------------------------------------
// matrix / scalar structure-condition audit

struct StructurePlan {
  std::vector<double> radii = {10.0, 100.0, 1000.0};
  int n_dir = 6;
  int n_eta = 8;
  int n_xi = 8;
  int n_x = 4;
  int n_z = 3;
  double z_range = 1.0;
  double M0 = 2.0;  // conditions audited on |p| >= M0
  double theta = 1.0;
  double q_exponent = 3.0;  // q of (SCTpintgradaij)
  double mu7 = 2.0;
  std::uint64_t seed = 9;
};

namespace detail {

inline double eta_norm(const Mat& a, const Mat& eta) {
  return std::sqrt((a * eta * eta.transpose()).trace());
}

struct EtaSet {
  std::vector<Mat> etas;
};

inline EtaSet make_eta_set(int n, const Vec& p, int n_random,
                           std::mt19937_64& rng) {
  EtaSet out;
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.etas.push_back(p * p.transpose());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Mat e = Mat::Zero(n, n);
      e(i, j) = 1.0;
      out.etas.push_back(e);
    }
  for (int k = 0; k < n_random; ++k) {
    Mat e(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e(i, j) = gauss(rng);
    out.etas.push_back(e);
  }
  return out;
}

}  // namespace detail

// Fitted multiplier for one matrix condition: the smallest m(state) with
//   lhs(eta) <= m * rhs_shape * E^{1/2} ||eta||_a  for every sampled eta,
// tracked as a sup per radius and classified by its tail.
struct FittedMultiplier {
  std::vector<double> radii;
  std::vector<double> sup;  // fitted multiplier per radius
  TailVerdict verdict = TailVerdict::stabilized;
  double last() const { return sup.empty() ? 0.0 : sup.back(); }
  bool to_zero() const { return verdict == TailVerdict::converges_to_zero; }
  bool bounded() const {
    return verdict != TailVerdict::diverges && std::isfinite(last());
  }
};

class StructureAudit {
 public:
  StructureAudit(const EquationCoefficients& eq, const BoundaryCondition& bc,
                 const Domain& dom, const BoundaryConstants& cst,
                 Multipliers mult, StructurePlan plan,
                 std::vector<double> eps_list = {1e-2, 1e-3})
      : eq_(eq),
        bc_(bc),
        dom_(dom),
        cst_(cst),
        mult_(std::move(mult)),
        plan_(std::move(plan)),
        eps_list_(std::move(eps_list)),
        nu1_(cheap_nu1(bc, dom)) {}

  // generic fitted multiplier for a condition of the form
  //  lhs(state, eta) <= mult(v) * scale(state) * ||eta||_a
  FittedMultiplier fit(
      const std::function<double(const StatePoint&, const Mat&)>& lhs,
      const std::function<double(const StatePoint&, const Mat&)>& rhs) const {
    FittedMultiplier out;
    std::mt19937_64 rng(derive_seed(plan_.seed, "eta"));
    auto anchors = dom_.boundary_points(plan_.n_x);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double r : plan_.radii) {
      double sup = 0.0;
      for (const Vec& xb : anchors) {
        GeometryJet gj = dom_.geometry_jet(xb);
        Vec x = xb + 0.1 * dom_.R0() * gj.gamma;
        for (int iz = 0; iz < plan_.n_z; ++iz) {
          double z = plan_.n_z == 1 ? 0.0
                                    : -plan_.z_range + 2.0 * plan_.z_range *
                                                           iz / (plan_.n_z - 1);
          for (int id = 0; id < plan_.n_dir; ++id) {
            Vec dir(dom_.dim());
            for (int k = 0; k < dom_.dim(); ++k) dir[k] = gauss(rng);
            if (dir.norm() < 1e-12) continue;
            StatePoint st(x, z, (r * dir / dir.norm()).eval(), 0.0);
            if (st.p.norm() < plan_.M0) continue;
            auto etas = detail::make_eta_set(dom_.dim(), st.p, plan_.n_eta,
                                             rng);
            for (const Mat& eta : etas) {
              double denom = rhs(st, eta);
              if (denom <= 1e-300) continue;
              sup = std::max(sup, lhs(st, eta) / denom);
            }
          }
        }
      }
      out.radii.push_back(r);
      out.sup.push_back(sup);
    }
    auto est = detail::classify_tail(out.radii, out.sup, true);
    out.verdict = est.verdict;
    return out;
  }

  // --- condition evaluators keyed by registry id ------------------------

  // (SC1aij1): (delta_1 + r + 1) a^{ij} eta_ij <= mu~(v)/v E^{1/2}||eta||_a
  FittedMultiplier sc1aij1() const {
    return fit(
        [this](const StatePoint& st, const Mat& eta) {
          Mat lhs = eq_.delta1_aij(st) + (mult_.r(st) + 1.0) * eq_.aij(st);
          return (lhs.array() * eta.array()).sum();
        },
        [this](const StatePoint& st, const Mat& eta) {
          double v = std::sqrt(1.0 + st.p.squaredNorm());
          return std::sqrt(eq_.E(st)) / v *
                 detail::eta_norm(eq_.aij(st), eta);
        });
  }

  // (SC1aij2): (delta_2 + s) a^{ij} eta_ij, per eps through nu1
  FittedMultiplier sc1aij2(double eps) const {
    return fit(
        [this, eps](const StatePoint& st, const Mat& eta) {
          Vec n1 = nu1_(st, eps);
          double den = st.p.dot(n1);
          if (std::abs(den) < 1e-12) return 0.0;
          Mat d2 = eq_.aij_z(st);
          auto dx = eq_.aij_x(st);
          for (int k = 0; k < st.dim(); ++k) d2 += dx[k] * n1[k] / den;
          Mat lhs = d2 + mult_.s(st) * eq_.aij(st);
          return (lhs.array() * eta.array()).sum();
        },
        [this](const StatePoint& st, const Mat& eta) {
          double v = std::sqrt(1.0 + st.p.squaredNorm());
          return std::sqrt(eq_.E(st)) / v *
                 detail::eta_norm(eq_.aij(st), eta);
        });
  }

  // (SC1aijp): |a^{ij}_p eta_ij| <= mu~_*(v)/v E^{1/2}||eta||_a
  FittedMultiplier sc1aijp() const {
    return fit(
        [this](const StatePoint& st, const Mat& eta) {
          auto dp = eq_.aij_p(st);
          double s2 = 0.0;
          for (int k = 0; k < st.dim(); ++k)
            s2 += sqr((dp[k].array() * eta.array()).sum());
          return std::sqrt(s2);
        },
        [this](const StatePoint& st, const Mat& eta) {
          double v = std::sqrt(1.0 + st.p.squaredNorm());
          return std::sqrt(eq_.E(st)) / v *
                 detail::eta_norm(eq_.aij(st), eta);
        });
  }

  // scalar fits over the state sweep: returns sup of fn per radius
  FittedMultiplier scalar_fit(
      const std::function<double(const StatePoint&)>& fn) const {
    return fit([fn](const StatePoint& st, const Mat&) { return fn(st); },
               [](const StatePoint&, const Mat&) { return 1.0; });
  }

  const EquationCoefficients& eq() const { return eq_; }
  const StructurePlan& plan() const { return plan_; }
  const Multipliers& multipliers() const { return mult_; }
  const std::vector<double>& eps_list() const { return eps_list_; }
  Nu1Provider nu1_provider() const { return nu1_; }

 private:
  const EquationCoefficients& eq_;
  const BoundaryCondition& bc_;
  const Domain& dom_;
  BoundaryConstants cst_;
  Multipliers mult_;
  StructurePlan plan_;
  std::vector<double> eps_list_;
  Nu1Provider nu1_;
};

// ---------------------------------------------------------------------------
// theorem applicability classification

struct Classification {
  std::string verdict = "none";  // "Thm 5.1" | ... | "none"
  std::vector<std::string> reasons;  // failures of the best candidate route
  ConditionReport report;
  LimitEstimates limits;
};

inline Classification classify_structure(const EquationCoefficients& eq,
                                         const BoundaryCondition& bc,
                                         const Domain& dom,
                                         const BoundaryConstants& cst,
                                         const StructurePlan& plan,
                                         const LimitPlan& lplan,
                                         const std::vector<double>& eps_list) {
  Classification out;
  Multipliers mult = preset_multipliers(eq);
  StructureAudit audit(eq, bc, dom, cst, mult, plan, eps_list);
  out.limits = limit_estimates(eq, bc, dom, lplan, mult, eps_list);

  auto add_cond = [&](const std::string& id, bool pass, double margin,
                      std::map<std::string, double> fitted = {}) {
    ConditionResult r;
    r.id = id;
    r.pass = pass;
    r.margin = margin;
    r.fitted = std::move(fitted);
    out.report.add(r);
    return pass;
  };

  // fitted matrix-condition multipliers
  auto m1 = audit.sc1aij1();
  auto mp = audit.sc1aijp();
  bool sc1aij1_ok =
      add_cond("SC1aij1", m1.to_zero(), -m1.last(), {{"mu_last", m1.last()}});
  bool sc1aijp_ok = add_cond("SC1aijp", mp.bounded(), 0.0,
                             {{"mu_star_last", mp.last()},
                              {"K", mp.last() * plan.radii.back()}});
  bool sc1aij2_ok = true;
  for (double eps : eps_list) {
    auto m2 = audit.sc1aij2(eps);
    ConditionResult r;
    r.id = "SC1aij2";
    r.eps = eps;
    r.pass = m2.to_zero() || m2.last() < 1e-12;
    r.margin = -m2.last();
    r.fitted["mu_eps_last"] = m2.last();
    out.report.add(r);
    sc1aij2_ok = sc1aij2_ok && r.pass;
  }

  // scalar conditions
  auto mu2_fit = audit.scalar_fit([&](const StatePoint& st) {
    return std::abs(eq.a().value(st)) / eq.E(st);
  });
  bool eaE_ok = add_cond("EaE", mu2_fit.bounded(), 0.0,
                         {{"mu2", mu2_fit.last()}});
  auto lamE_fit = audit.scalar_fit([&](const StatePoint& st) {
    double v2 = 1.0 + st.p.squaredNorm();
    return eq.Lambda(st) * v2 / eq.E(st);  // = (Lambda / (mu*^2 E)) * (v mu*)^2
  });
  bool lamE_ok = add_cond("ElambdaE1", lamE_fit.bounded(), 0.0,
                          {{"K2", lamE_fit.last()}});
  auto ap_fit = audit.scalar_fit([&](const StatePoint& st) {
    double v = std::sqrt(1.0 + st.p.squaredNorm());
    return eq.a().dp(st).norm() * v / eq.E(st);
  });
  bool sc1p_ok = add_cond("SC1p", ap_fit.bounded(), 0.0,
                          {{"K", ap_fit.last()}});

  // limit quantities
  bool bprime_zero = true, c_nonpos = true, bprime_bounded = true,
       c_bounded = true;
  for (double eps : eps_list) {
    std::string key = fmt_g(eps);
    const auto& bp = out.limits.Bprime.at(key);
    const auto& c = out.limits.C.at(key);
    bprime_zero = bprime_zero && bp.verdict == TailVerdict::converges_to_zero;
    bprime_bounded = bprime_bounded && bp.converges();
    c_nonpos = c_nonpos && c.converges() && c.limit <= 1e-9;
    c_bounded = c_bounded && c.converges();
    ConditionResult r;
    r.id = "Bprime_infty";
    r.eps = eps;
    r.pass = bp.verdict == TailVerdict::converges_to_zero;
    r.fitted["estimate"] = bp.sups.back();
    r.note = to_string(bp.verdict);
    out.report.add(r);
    ConditionResult rc;
    rc.id = "C_infty";
    rc.eps = eps;
    rc.pass = c.converges() && c.limit <= 1e-9;
    rc.fitted["estimate"] = c.sups.back();
    rc.note = to_string(c.verdict);
    out.report.add(rc);
  }

  // (Etildelimit1): (1 + eps_x(s) s) mu~_*(s) -> 0; with the fitted
  // mu~_* ~ K/s shape this happens iff eps_x(s) stays bounded by c/s
  bool tl1_ok;
  {
    double s1 = plan.radii[plan.radii.size() - 2], s2 = plan.radii.back();
    double q1 = (1.0 + cst.eps_x(s1) * s1) * mp.sup[mp.sup.size() - 2];
    double q2 = (1.0 + cst.eps_x(s2) * s2) * mp.sup.back();
    double slope = (q1 > 0 && q2 > 0)
                       ? std::log(q2 / q1) / std::log(s2 / s1)
                       : -1.0;
    tl1_ok = add_cond("Etildelimit1", q2 < 1e-12 || slope < -0.1, -slope,
                      {{"last", q2}});
  }

  // boundary delta-conditions with the fitted mu_star shape
  double Kstar = std::max(1e-12, mp.last() * plan.radii.back());
  BoundaryAuditOptions bopts;
  bopts.mu_star = [Kstar](double s) { return Kstar / s; };
  // capillary-type: mu~(sigma) = K (1/sigma + 1/(sigma h) + max(0, h'/h^2))
  bopts.mu_tilde = [&bc, Kstar](double s) {
    double base = 1.0 / s;
    if (const auto* cap = dynamic_cast<const CapillaryBC*>(&bc)) {
      double hv = cap->h()(s);
      base += 1.0 / (s * hv) + std::max(0.0, cap->h().deriv(s) / (hv * hv));
    }
    return 16.0 * std::max(Kstar, 1.0) * base;
  };
  SamplePlan bplan;
  bplan.radii = plan.radii;
  bplan.seed = derive_seed(plan.seed, "bnd");
  auto brep =
      boundary_condition_audit(bc, dom, cst, {"Edelta1b", "Elimbz"}, bplan,
                               bopts);
  bool delta1b_ok = true, limbz_ok = true;
  for (const auto& r : brep.results) {
    out.report.add(r);
    if (r.id == "Edelta1b1" || r.id == "Edelta1b2")
      delta1b_ok = delta1b_ok && r.pass;
    if (r.id == "Elimbz") limbz_ok = r.pass;
  }

  // route: Theorem 5.1 (global elliptic, C_infty <= 0)
  std::vector<std::string> fail51;
  if (!sc1aij1_ok) fail51.push_back("SC1aij1");
  if (!sc1aij2_ok) fail51.push_back("SC1aij2");
  if (!sc1aijp_ok) fail51.push_back("SC1aijp");
  if (!eaE_ok) fail51.push_back("EaE");
  if (!lamE_ok) fail51.push_back("ElambdaE1");
  if (!sc1p_ok) fail51.push_back("SC1p");
  if (!bprime_zero) fail51.push_back("B'_infty > 0");
  if (!c_nonpos) fail51.push_back("C_infty > 0");
  if (!tl1_ok) fail51.push_back("Etildelimit1");
  if (!delta1b_ok) fail51.push_back("Edelta1b");

  // route: Theorem 5.2 (SC1aij1 relaxed to SC2aij, needs Elimbz)
  auto m2aij = audit.fit(
      [&](const StatePoint& st, const Mat& eta) {
        Mat lhs = eq.delta1_aij(st) + (mult.r(st) + 1.0) * eq.aij(st);
        return (lhs.array() * eta.array()).sum();
      },
      [&](const StatePoint& st, const Mat& eta) {
        double v = std::sqrt(1.0 + st.p.squaredNorm());
        return std::sqrt(eq.E(st)) / v * detail::eta_norm(eq.aij(st), eta);
      });
  bool sc2aij_ok = add_cond("SC2aij", m2aij.bounded(), 0.0,
                            {{"mu2", m2aij.last()}});
  std::vector<std::string> fail52;
  if (!sc2aij_ok) fail52.push_back("SC2aij");
  if (!sc1aij2_ok) fail52.push_back("SC1aij2");
  if (!sc1aijp_ok) fail52.push_back("SC1aijp");
  if (!lamE_ok) fail52.push_back("ElambdaE1");
  if (!sc1p_ok) fail52.push_back("SC1p");
  if (!bprime_zero) fail52.push_back("B'_infty > 0");
  if (!c_nonpos) fail52.push_back("C_infty > 0");
  if (!tl1_ok) fail52.push_back("Etildelimit1");
  if (!limbz_ok) fail52.push_back("Elimbz");

  // route: Theorem 5.4 (small oscillation)
  auto m262 = audit.sc1aij2(eps_list.front());
  bool sc262_ok = add_cond("SCaij262", m262.bounded(), 0.0,
                           {{"mu2", m262.last()}});
  std::vector<std::string> fail54;
  if (!sc1aijp_ok) fail54.push_back("SC1aijp");
  if (!sc2aij_ok) fail54.push_back("SC2aij");
  if (!sc262_ok) fail54.push_back("SCaij262");
  if (!lamE_ok) fail54.push_back("ElambdaE1");
  if (!bprime_bounded) fail54.push_back("B'_infty unbounded");
  if (!c_bounded) fail54.push_back("C_infty unbounded");

  if (fail51.empty()) {
    out.verdict = eq.parabolic() ? "Thm 8.1" : "Thm 5.1";
  } else if (fail52.empty()) {
    out.verdict = eq.parabolic() ? "Thm 8.1(2)" : "Thm 5.2";
  } else if (fail54.empty()) {
    out.verdict = eq.parabolic() ? "Thm 8.1(4)" : "Thm 5.4 (small osc)";
    out.reasons = fail51;
  } else {
    out.verdict = "none";
    out.reasons = fail51;
  }
  if (out.verdict != "none" && out.reasons.empty()) out.reasons = {};
  if (out.verdict == "none" && !fail51.empty()) out.reasons = fail51;
  return out;
}

// uniformly elliptic catalog route: the theta = 1, r = -1, s = 0 conditions
inline ConditionReport uniformly_elliptic_conditions(
    const EquationCoefficients& eq, const BoundaryCondition& bc,
    const Domain& dom, const BoundaryConstants& cst,
    const StructurePlan& plan) {
  ConditionReport rep;
  Multipliers mult = Multipliers::constants(-1.0, 0.0);
  StructureAudit audit(eq, bc, dom, cst, mult, plan);

  auto sc2 = audit.fit(
      [&](const StatePoint& st, const Mat& eta) {
        Mat lhs = eq.delta1_aij(st) + 0.0 * eq.aij(st);  // r + 1 = 0
        return (lhs.array() * eta.array()).sum();
      },
      [&](const StatePoint& st, const Mat& eta) {
        double v = std::sqrt(1.0 + st.p.squaredNorm());
        return std::sqrt(eq.E(st)) / v * detail::eta_norm(eq.aij(st), eta);
      });
  ConditionResult r1;
  r1.id = "SC2aij";
  r1.pass = sc2.bounded();
  r1.fitted["mu2"] = sc2.last();
  rep.add(r1);

  auto s262 = audit.sc1aij2(1e-2);
  ConditionResult r2;
  r2.id = "SCaij262";
  r2.pass = s262.bounded();
  r2.fitted["mu2"] = s262.last();
  rep.add(r2);

  double theta = 1.0;
  auto ploc = audit.fit(
      [&](const StatePoint& st, const Mat& eta) {
        auto dp = eq.aij_p(st);
        double s2 = 0.0;
        for (int k = 0; k < st.dim(); ++k)
          s2 += sqr((dp[k].array() * eta.array()).sum());
        double v = std::sqrt(1.0 + st.p.squaredNorm());
        return std::pow(v, 1.0 + theta) * std::sqrt(s2);
      },
      [&](const StatePoint& st, const Mat& eta) {
        return std::sqrt(eq.E(st)) * detail::eta_norm(eq.aij(st), eta);
      });
  ConditionResult r3;
  r3.id = "SC1aijploc";
  r3.pass = ploc.bounded();
  r3.fitted["mu3"] = ploc.last();
  rep.add(r3);

  auto lam2a = audit.scalar_fit([&](const StatePoint& st) {
    double v = std::sqrt(1.0 + st.p.squaredNorm());
    return std::pow(v, 2.0 * theta) * eq.Lambda(st) / eq.E(st);
  });
  ConditionResult r4;
  r4.id = "ElambdaE2a";
  r4.pass = lam2a.bounded();
  r4.fitted["mu3^2"] = lam2a.last();
  rep.add(r4);

  auto lam2b = audit.scalar_fit([&](const StatePoint& st) {
    double v = std::sqrt(1.0 + st.p.squaredNorm());
    return std::pow(v, theta) * eq.a().dp(st).norm() / eq.E(st);
  });
  ConditionResult r5;
  r5.id = "ElambdaE2b";
  r5.pass = lam2b.bounded();
  r5.fitted["mu3"] = lam2b.last();
  rep.add(r5);

  // (SC1UE): a^{ij} >= mu^* Lambda
  auto mu_star = audit.scalar_fit([&](const StatePoint& st) {
    return eq.Lambda(st) / eq.lambda_min(st);
  });
  ConditionResult r6;
  r6.id = "SC1UE";
  r6.pass = mu_star.bounded();
  r6.fitted["1/mu*"] = mu_star.last();
  rep.add(r6);
  return rep;
}

}  // namespace oblab
