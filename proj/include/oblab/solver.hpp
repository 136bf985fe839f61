#pragma once

#include "oblab/boundary.hpp"
#include "oblab/common.hpp"
#include "oblab/geometry.hpp"
#include "oblab/structure.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace oblab {

struct Mesh1D {
  double a = 0.0, b = 1.0;
  int n = 64;  // cells; n+1 nodes
  double h() const { return (b - a) / n; }
  double x(int i) const { return a + i * h(); }
  int nodes() const { return n + 1; }
};

struct MeshDisk {
  double R = 1.0;
  int nr = 16, nth = 32;
  double dr() const { return R / nr; }
  double dth() const { return 2.0 * M_PI / nth; }
  int nodes() const { return 1 + nr * nth; }
  int index(int i, int j) const {  // i in [1, nr], j wraps
    return 1 + (i - 1) * nth + ((j % nth) + nth) % nth;
  }
};

struct GridSolution {
  bool is_disk = false;
  Mesh1D mesh;
  MeshDisk disk;
  Vec u;
  double residual_inf = 0.0;
  double boundary_residual = 0.0;
  int newton_iters = 0;
  bool converged = false;
  // parabolic trajectory (frames[k] at times[k]); u holds the final frame
  std::vector<Vec> frames;
  std::vector<double> times;

  int nodes() const { return is_disk ? disk.nodes() : mesh.nodes(); }

  // 1-D derivatives with second-order one-sided stencils at the ends
  double Du1(int i, const Vec& v) const {
    double h = mesh.h();
    if (i == 0) return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    if (i == mesh.n)
      return (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h);
    return (v[i + 1] - v[i - 1]) / (2.0 * h);
  }
  double D2u1(int i, const Vec& v) const {
    double h = mesh.h();
    if (i == 0) return (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
    if (i == mesh.n)
      return (2.0 * v[i] - 5.0 * v[i - 1] + 4.0 * v[i - 2] - v[i - 3]) /
             (h * h);
    return (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
  }
  double Du1(int i) const { return Du1(i, u); }
  double D2u1(int i) const { return D2u1(i, u); }

  double sup_Du() const {
    double m = 0.0;
    if (!is_disk) {
      for (int i = 0; i <= mesh.n; ++i) m = std::max(m, std::abs(Du1(i)));
    } else {
      for (int i = 1; i <= disk.nr; ++i)
        for (int j = 0; j < disk.nth; ++j)
          m = std::max(m, disk_grad(i, j, u).norm());
    }
    return m;
  }

  // cartesian gradient on the polar grid (one-sided in r at the rim)
  Vec disk_grad(int i, int j, const Vec& v) const {
    double dr = disk.dr(), dth = disk.dth();
    double th = j * dth, r = i * dr;
    auto val = [&](int ii, int jj) -> double {
      if (ii == 0) return v[0];
      return v[disk.index(ii, jj)];
    };
    double ur, ut;
    if (i == disk.nr) {
      ur = (3.0 * val(i, j) - 4.0 * val(i - 1, j) + val(i - 2, j)) /
           (2.0 * dr);
    } else {
      ur = (val(i + 1, j) - val(i - 1, j)) / (2.0 * dr);
    }
    ut = (val(i, j + 1) - val(i, j - 1)) / (2.0 * dth);
    double c = std::cos(th), s = std::sin(th);
    Vec g(2);
    g << c * ur - s * ut / r, s * ur + c * ut / r;
    return g;
  }
};

struct SolverOptions {
  double tol = 1e-10;
  int max_newton = 60;
  int max_backtrack = 30;
  bool throw_on_fail = true;
  std::optional<int> pin_node;     // gauge fix for pure-Neumann problems
  double pin_value = 0.0;
  int continuation_levels = 0;    // coarse-mesh warm starts
};

namespace detail {

// residual rows for the 1-D problem; parabolic mode adds -(u-uprev)/dt
struct Residual1D {
  const EquationCoefficients& eq;
  const BoundaryCondition& bc;
  const Domain& dom;
  Mesh1D mesh;
  const Vec* uprev = nullptr;
  double dt = 0.0;
  double time = 0.0;
  std::optional<int> pin_node;
  double pin_value = 0.0;

  double row(int i, const Vec& u) const {
    if (pin_node && *pin_node == i) return u[i] - pin_value;
    double h = mesh.h();
    Vec x(1);
    x << mesh.x(i);
    if (i == 0 || i == mesh.n) {
      Vec p(1);
      p << (i == 0 ? (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
                   : (3.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / (2.0 * h));
      StatePoint s(x, u[i], p, time);
      return bc.value(dom, s);
    }
    Vec p(1);
    p << (u[i + 1] - u[i - 1]) / (2.0 * h);
    double d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
    StatePoint s(x, u[i], p, time);
    double A = eq.aij(s)(0, 0);
    if (A <= 0.0) throw EllipticityLost("a^{11} <= 0 at x=" + fmt_g(x[0]));
    double r = A * d2 + eq.a().value(s);
    if (uprev) r += -(u[i] - (*uprev)[i]) / dt;
    return r;
  }

  std::vector<int> stencil(int i) const {
    if (pin_node && *pin_node == i) return {i};
    if (i == 0) return {0, 1, 2};
    if (i == mesh.n) return {i - 2, i - 1, i};
    return {i - 1, i, i + 1};
  }
  int size() const { return mesh.nodes(); }
};

// residual rows on the polar grid of a disk
struct ResidualDisk {
  const EquationCoefficients& eq;
  const BoundaryCondition& bc;
  const Domain& dom;
  MeshDisk mesh;
  const Vec* uprev = nullptr;
  double dt = 0.0;
  double time = 0.0;
  std::optional<int> pin_node;
  double pin_value = 0.0;

  double val(const Vec& u, int i, int j) const {
    if (i == 0) return u[0];
    return u[mesh.index(i, j)];
  }

  double row(int idx, const Vec& u) const {
    if (pin_node && *pin_node == idx) return u[idx] - pin_value;
    double dr = mesh.dr(), dth = mesh.dth();
    int nth = mesh.nth;
    if (idx == 0) {
      // origin: gradient and Hessian from the Fourier modes of ring 1
      double A0 = 0, A1 = 0, B1 = 0, A2 = 0, B2 = 0;
      for (int j = 0; j < nth; ++j) {
        double th = j * dth, uj = val(u, 1, j);
        A0 += uj;
        A1 += uj * std::cos(th);
        B1 += uj * std::sin(th);
        A2 += uj * std::cos(2 * th);
        B2 += uj * std::sin(2 * th);
      }
      A0 /= nth;
      A1 *= 2.0 / nth;
      B1 *= 2.0 / nth;
      A2 *= 2.0 / nth;
      B2 *= 2.0 / nth;
      Vec x = Vec::Zero(2), p(2);
      p << A1 / dr, B1 / dr;
      double trH = 4.0 * (A0 - u[0]) / (dr * dr);   // u_xx + u_yy
      double difH = 4.0 * A2 / (dr * dr);           // u_xx - u_yy
      double offH = 2.0 * B2 / (dr * dr);           // u_xy
      Mat H(2, 2);
      H << 0.5 * (trH + difH), offH, offH, 0.5 * (trH - difH);
      StatePoint s(x, u[0], p, time);
      Mat A = eq.aij(s);
      double r = (A.array() * H.array()).sum() + eq.a().value(s);
      if (uprev) r += -(u[0] - (*uprev)[0]) / dt;
      return r;
    }
    int i = (idx - 1) / nth + 1;
    int j = (idx - 1) % nth;
    double th = j * dth, r = i * dr;
    double c = std::cos(th), sn = std::sin(th);
    Vec x(2);
    x << r * c, r * sn;
    if (i == mesh.nr) {
      double ur = (3.0 * val(u, i, j) - 4.0 * val(u, i - 1, j) +
                   val(u, i - 2, j)) /
                  (2.0 * dr);
      double ut = (val(u, i, j + 1) - val(u, i, j - 1)) / (2.0 * dth);
      Vec p(2);
      p << c * ur - sn * ut / r, sn * ur + c * ut / r;
      StatePoint s(x, val(u, i, j), p, time);
      return bc.value(dom, s);
    }
    double ur = (val(u, i + 1, j) - val(u, i - 1, j)) / (2.0 * dr);
    double ut = (val(u, i, j + 1) - val(u, i, j - 1)) / (2.0 * dth);
    double urr = (val(u, i + 1, j) - 2.0 * val(u, i, j) + val(u, i - 1, j)) /
                 (dr * dr);
    double utt = (val(u, i, j + 1) - 2.0 * val(u, i, j) + val(u, i, j - 1)) /
                 (dth * dth);
    double utm = (val(u, i - 1, j + 1) - val(u, i - 1, j - 1)) / (2.0 * dth);
    double utp = (val(u, i + 1, j + 1) - val(u, i + 1, j - 1)) / (2.0 * dth);
    double urt = (utp - utm) / (2.0 * dr);
    // cartesian derivatives from the polar ones
    double ux = c * ur - sn * ut / r;
    double uy = sn * ur + c * ut / r;
    double uxx = c * c * urr - 2.0 * c * sn * (urt / r - ut / (r * r)) +
                 sn * sn * (ur / r + utt / (r * r));
    double uyy = sn * sn * urr + 2.0 * c * sn * (urt / r - ut / (r * r)) +
                 c * c * (ur / r + utt / (r * r));
    double uxy = c * sn * urr + (c * c - sn * sn) * (urt / r - ut / (r * r)) -
                 c * sn * (ur / r + utt / (r * r));
    Vec p(2);
    p << ux, uy;
    StatePoint s(x, val(u, i, j), p, time);
    Mat A = eq.aij(s);
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw EllipticityLost("indefinite coefficient matrix");
    Mat H(2, 2);
    H << uxx, uxy, uxy, uyy;
    double res = (A.array() * H.array()).sum() + eq.a().value(s);
    if (uprev) res += -(val(u, i, j) - (*uprev)[idx]) / dt;
    return res;
  }

  std::vector<int> stencil(int idx) const {
    if (pin_node && *pin_node == idx) return {idx};
    int nth = mesh.nth;
    if (idx == 0) {
      std::vector<int> s{0};
      for (int j = 0; j < nth; ++j) s.push_back(mesh.index(1, j));
      return s;
    }
    int i = (idx - 1) / nth + 1;
    int j = (idx - 1) % nth;
    std::vector<int> s{idx, mesh.index(i, j + 1), mesh.index(i, j - 1)};
    auto push = [&](int ii, int jj) {
      if (ii == 0) {
        s.push_back(0);
      } else {
        s.push_back(mesh.index(ii, jj));
      }
    };
    if (i == mesh.nr) {
      push(i - 1, j);
      push(i - 2, j);
    } else {
      push(i + 1, j);
      push(i - 1, j);
      push(i + 1, j + 1);
      push(i + 1, j - 1);
      push(i - 1, j + 1);
      push(i - 1, j - 1);
    }
    return s;
  }
  int size() const { return mesh.nodes(); }
};

template <class R>
Vec full_residual(const R& res, const Vec& u) {
  Vec out(res.size());
  for (int i = 0; i < res.size(); ++i) out[i] = res.row(i, u);
  return out;
}

// damped Newton with Armijo backtracking on the residual norm
template <class R>
void newton_solve(const R& res, Vec& u, const SolverOptions& opts,
                  double* residual_out, int* iters_out) {
  using Trip = Eigen::Triplet<double>;
  int n = res.size();
  Vec r = full_residual(res, u);
  double rn = r.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < opts.max_newton && rn > opts.tol; ++it) {
    std::vector<Trip> trips;
    trips.reserve(9 * n);
    for (int i = 0; i < n; ++i) {
      for (int j : res.stencil(i)) {
        double h = 1e-7 * (1.0 + std::abs(u[j]));
        Vec up = u;
        up[j] += h;
        double dp = res.row(i, up);
        up[j] = u[j] - h;
        double dm = res.row(i, up);
        trips.emplace_back(i, j, (dp - dm) / (2.0 * h));
      }
    }
    Eigen::SparseMatrix<double> J(n, n);
    J.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw NewtonDiverged("singular linearization (residual " + fmt_g(rn) +
                           ")");
    Vec delta = lu.solve(-r);
    double t = 1.0;
    Vec u_new;
    double rn_new = rn;
    int bt = 0;
    for (; bt < opts.max_backtrack; ++bt) {
      u_new = u + t * delta;
      Vec r_new = full_residual(res, u_new);
      rn_new = r_new.lpNorm<Eigen::Infinity>();
      if (rn_new < (1.0 - 0.25 * t) * rn + 1e-16) {
        u = u_new;
        r = r_new;
        rn = rn_new;
        break;
      }
      t *= 0.5;
    }
    if (bt == opts.max_backtrack) break;  // stalled
  }
  *residual_out = rn;
  *iters_out = it;
  if (rn > opts.tol && opts.throw_on_fail)
    throw NewtonDiverged("Newton stalled at residual " + fmt_g(rn) + " after " +
                         std::to_string(it) + " iterations");
}

}  // namespace detail

inline GridSolution solve_elliptic(const EquationCoefficients& eq,
                                   const BoundaryCondition& bc,
                                   const Domain& dom, const Mesh1D& mesh,
                                   std::function<double(double)> init = {},
                                   const SolverOptions& opts = {}) {
  GridSolution sol;
  sol.mesh = mesh;
  sol.u = Vec::Zero(mesh.nodes());
  if (init)
    for (int i = 0; i < mesh.nodes(); ++i) sol.u[i] = init(mesh.x(i));
  // coarse-mesh continuation
  if (opts.continuation_levels > 0 && mesh.n >= 16) {
    Mesh1D coarse = mesh;
    coarse.n = mesh.n / 2;
    SolverOptions copts = opts;
    copts.continuation_levels = opts.continuation_levels - 1;
    copts.tol = std::max(opts.tol, 1e-8);
    if (copts.pin_node) copts.pin_node = *opts.pin_node / 2;
    GridSolution cs = solve_elliptic(eq, bc, dom, coarse, init, copts);
    for (int i = 0; i < mesh.nodes(); ++i) {
      double xc = (mesh.x(i) - coarse.a) / coarse.h();
      int i0 = std::min(static_cast<int>(xc), coarse.n - 1);
      double w = xc - i0;
      sol.u[i] = (1.0 - w) * cs.u[i0] + w * cs.u[i0 + 1];
    }
  }
  detail::Residual1D res{eq, bc, dom, mesh, nullptr, 0.0, 0.0,
                         opts.pin_node, opts.pin_value};
  detail::newton_solve(res, sol.u, opts, &sol.residual_inf,
                       &sol.newton_iters);
  sol.converged = sol.residual_inf <= opts.tol;
  Vec x0(1), p0(1);
  x0 << mesh.a;
  p0 << sol.Du1(0);
  sol.boundary_residual = std::abs(bc.value(dom, StatePoint(x0, sol.u[0], p0)));
  return sol;
}

inline GridSolution solve_elliptic_disk(const EquationCoefficients& eq,
                                        const BoundaryCondition& bc,
                                        const Domain& dom,
                                        const MeshDisk& mesh,
                                        std::function<double(const Vec&)> init = {},
                                        const SolverOptions& opts = {}) {
  GridSolution sol;
  sol.is_disk = true;
  sol.disk = mesh;
  sol.u = Vec::Zero(mesh.nodes());
  if (init) {
    Vec x = Vec::Zero(2);
    sol.u[0] = init(x);
    for (int i = 1; i <= mesh.nr; ++i)
      for (int j = 0; j < mesh.nth; ++j) {
        x << i * mesh.dr() * std::cos(j * mesh.dth()),
            i * mesh.dr() * std::sin(j * mesh.dth());
        sol.u[mesh.index(i, j)] = init(x);
      }
  }
  detail::ResidualDisk res{eq, bc, dom, mesh, nullptr, 0.0, 0.0,
                           opts.pin_node, opts.pin_value};
  detail::newton_solve(res, sol.u, opts, &sol.residual_inf,
                       &sol.newton_iters);
  sol.converged = sol.residual_inf <= opts.tol;
  return sol;
}

inline GridSolution solve_parabolic(const EquationCoefficients& eq,
                                    const BoundaryCondition& bc,
                                    const Domain& dom, const Mesh1D& mesh,
                                    std::function<double(double)> u0,
                                    double T, double dt,
                                    const SolverOptions& opts = {}) {
  GridSolution sol;
  sol.mesh = mesh;
  sol.u = Vec::Zero(mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i) sol.u[i] = u0(mesh.x(i));
  sol.frames.push_back(sol.u);
  sol.times.push_back(0.0);
  int steps = static_cast<int>(std::ceil(T / dt - 1e-12));
  Vec uprev = sol.u;
  for (int k = 1; k <= steps; ++k) {
    double t_prev = (k - 1) * dt;
    double t = std::min(k * dt, T);
    double dtk = t - t_prev;
    detail::Residual1D res{eq,  bc,  dom, mesh, &uprev,
                           dtk, t,   opts.pin_node, opts.pin_value};
    double rn;
    int it;
    detail::newton_solve(res, sol.u, opts, &rn, &it);
    sol.residual_inf = std::max(sol.residual_inf, rn);
    sol.newton_iters += it;
    uprev = sol.u;
    sol.frames.push_back(sol.u);
    sol.times.push_back(t);
  }
  sol.converged = sol.residual_inf <= opts.tol;
  return sol;
}

// ---------------------------------------------------------------------------
// gradient-bound refinement audit

struct GradientAuditRow {
  int n = 0;
  double h = 0.0;
  double sup_Du = 0.0;
  double argmax_x = 0.0;
  double residual = 0.0;
};

struct GradientAuditTable {
  std::vector<GradientAuditRow> rows;
  bool mesh_stable = false;  // variation < 5% across the refinements
  double variation = 0.0;
};

inline GradientAuditTable gradient_audit(
    const EquationCoefficients& eq, const BoundaryCondition& bc,
    const Domain& dom, Mesh1D base, int refinements,
    std::function<double(double)> init = {}, const SolverOptions& opts = {}) {
  GradientAuditTable table;
  Mesh1D mesh = base;
  for (int k = 0; k <= refinements; ++k) {
    GridSolution sol = solve_elliptic(eq, bc, dom, mesh, init, opts);
    GradientAuditRow row;
    row.n = mesh.n;
    row.h = mesh.h();
    row.sup_Du = 0.0;
    for (int i = 0; i <= mesh.n; ++i) {
      double d = std::abs(sol.Du1(i));
      if (d > row.sup_Du) {
        row.sup_Du = d;
        row.argmax_x = mesh.x(i);
      }
    }
    row.residual = sol.residual_inf;
    table.rows.push_back(row);
    mesh.n *= 2;
  }
  double lo = 1e300, hi = 0.0;
  for (const auto& r : table.rows) {
    lo = std::min(lo, r.sup_Du);
    hi = std::max(hi, r.sup_Du);
  }
  table.variation = (hi - lo) / std::max(1e-300, hi);
  table.mesh_stable = table.variation < 0.05;
  return table;
}

}  // namespace oblab
