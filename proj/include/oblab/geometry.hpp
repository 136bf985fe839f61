#pragma once

#include "oblab/common.hpp"
#include "oblab/rootfind.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace oblab {

enum class DomainKind { interval, disk, annulus, level_set };

// Geometry data at one point of the two-sided boundary collar:
// signed distance d (positive inside), the extended normal gamma = Dd,
// its Jacobian, the tangential projector c^{km} = delta^{km} - g^k g^m,
// and the derivative tensors needed by the audits.
struct GeometryJet {
  double d = 0.0;
  Vec gamma;
  Mat dgamma;                 // dgamma(k,i) = d gamma^k / d x_i
  Mat proj;                   // c^{km}
  std::vector<Mat> dproj;     // dproj[i](k,m) = D_i c^{km}
  std::vector<Mat> d2gamma;   // d2gamma[k](i,j) = D_ij gamma^k
  bool xi_tilde_bound_ok = true;

  // xi_tilde_i = D_i gamma^k xi_k
  Vec xi_tilde(const Vec& xi) const { return dgamma.transpose() * xi; }
};

struct GradientDecomposition {
  Vec p;
  Vec p_tangential;
  double p_normal = 0.0;  // p . gamma
  double v = 1.0;
  double v_prime = 1.0;
  Vec nu;
};

struct LevelSetSpec {
  std::function<double(const Vec&)> phi;         // Omega = { phi < 0 }
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;           // optional; FD fallback
  Vec probe_center;                               // interior point for R0 scan
  double probe_radius = 1.0;
};

class Domain {
 public:
  static Domain interval(double a, double b) {
    Domain d;
    d.kind_ = DomainKind::interval;
    d.a_ = a;
    d.b_ = b;
    d.dim_ = 1;
    d.r0_ = 0.5 * (b - a);
    return d;
  }
  static Domain disk(double radius) {
    Domain d;
    d.kind_ = DomainKind::disk;
    d.a_ = radius;
    d.dim_ = 2;
    d.r0_ = radius;
    return d;
  }
  static Domain annulus(double r_inner, double r_outer) {
    Domain d;
    d.kind_ = DomainKind::annulus;
    d.a_ = r_inner;
    d.b_ = r_outer;
    d.dim_ = 2;
    d.r0_ = std::min(r_inner, 0.5 * (r_outer - r_inner));
    return d;
  }
  static Domain level_set(LevelSetSpec spec, int dim) {
    Domain d;
    d.kind_ = DomainKind::level_set;
    d.ls_ = std::move(spec);
    d.dim_ = dim;
    d.r0_ = d.estimate_r0();
    return d;
  }

  Domain with_time_horizon(double T) const {
    Domain d = *this;
    d.parabolic_ = true;
    d.time_horizon_ = T;
    return d;
  }

  DomainKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double R0() const { return r0_; }
  bool parabolic() const { return parabolic_; }
  double time_horizon() const { return time_horizon_; }
  double interval_a() const { return a_; }
  double interval_b() const { return b_; }

  double distance(const Vec& x) const {
    switch (kind_) {
      case DomainKind::interval:
        return std::min(x[0] - a_, b_ - x[0]);
      case DomainKind::disk:
        return a_ - x.norm();
      case DomainKind::annulus: {
        double r = x.norm();
        return std::min(r - a_, b_ - r);
      }
      case DomainKind::level_set: {
        Vec y = project_to_boundary(x);
        double s = ls_.phi(x) <= 0.0 ? 1.0 : -1.0;
        return s * (x - y).norm();
      }
    }
    return 0.0;
  }

  bool inside(const Vec& x) const { return distance(x) > 0.0; }

  GeometryJet geometry_jet(const Vec& x) const {
    GeometryJet jet;
    jet.d = distance(x);
    if (jet.d >= r0_ * (1.0 - 1e-12) || jet.d <= -r0_)
      throw OutsideCollar("point outside the normal collar, d=" +
                          std::to_string(jet.d));
    const int n = dim_;
    jet.gamma = Vec::Zero(n);
    jet.dgamma = Mat::Zero(n, n);
    jet.d2gamma.assign(n, Mat::Zero(n, n));
    switch (kind_) {
      case DomainKind::interval: {
        jet.gamma[0] = (x[0] - a_ < b_ - x[0]) ? 1.0 : -1.0;
        break;
      }
      case DomainKind::disk:
        radial_jet(x, -1.0, jet);
        break;
      case DomainKind::annulus: {
        double r = x.norm();
        radial_jet(x, (r - a_ < b_ - r) ? 1.0 : -1.0, jet);
        break;
      }
      case DomainKind::level_set:
        level_set_jet(x, jet);
        break;
    }
    jet.proj = Mat::Identity(n, n) - jet.gamma * jet.gamma.transpose();
    jet.dproj.assign(n, Mat(n, n));
    for (int i = 0; i < n; ++i) {
      // D_i c^{km} = -(D_i gamma^k gamma^m + gamma^k D_i gamma^m)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m)
          jet.dproj[i](k, m) = -(jet.dgamma(k, i) * jet.gamma[m] +
                                 jet.gamma[k] * jet.dgamma(m, i));
    }
    if (jet.d < 0.5 * r0_ && jet.d > -0.5 * r0_) {
      double bound = 2.0 / r0_ + 1e-9;
      for (int k = 0; k < n; ++k) {
        Vec e = Vec::Zero(n);
        e[k] = 1.0;
        if (jet.xi_tilde(e).norm() > bound) jet.xi_tilde_bound_ok = false;
      }
    }
    return jet;
  }

  GradientDecomposition decompose(const Vec& x, const Vec& p) const {
    GeometryJet jet = geometry_jet(x);
    return decompose(jet, p);
  }

  static GradientDecomposition decompose(const GeometryJet& jet, const Vec& p) {
    GradientDecomposition g;
    g.p = p;
    g.p_normal = p.dot(jet.gamma);
    g.p_tangential = p - g.p_normal * jet.gamma;
    g.v = std::sqrt(1.0 + p.squaredNorm());
    g.v_prime = std::sqrt(1.0 + g.p_tangential.squaredNorm());
    g.nu = p / g.v;
    return g;
  }

  // Spatial distance doubles as the parabolic distance on cylinders: the
  // infimum over earlier times is attained at s = t.
  double d_star(const Vec& x, double /*t*/) const { return distance(x); }

  std::vector<Vec> boundary_points(int n) const {
    std::vector<Vec> pts;
    switch (kind_) {
      case DomainKind::interval: {
        Vec l(1), r(1);
        l[0] = a_;
        r[0] = b_;
        pts = {l, r};
        break;
      }
      case DomainKind::disk: {
        for (int j = 0; j < n; ++j) {
          double th = 2.0 * M_PI * j / n;
          Vec q(2);
          q << a_ * std::cos(th), a_ * std::sin(th);
          pts.push_back(q);
        }
        break;
      }
      case DomainKind::annulus: {
        for (int j = 0; j < n; ++j) {
          double th = 2.0 * M_PI * j / n;
          double r = (j % 2 == 0) ? a_ : b_;
          Vec q(2);
          q << r * std::cos(th), r * std::sin(th);
          pts.push_back(q);
        }
        break;
      }
      case DomainKind::level_set: {
        for (int j = 0; j < n; ++j) {
          double th = 2.0 * M_PI * j / n;
          Vec dir(dim_);
          dir.setZero();
          dir[0] = std::cos(th);
          if (dim_ > 1) dir[1] = std::sin(th);
          Vec q = ls_.probe_center + ls_.probe_radius * dir;
          pts.push_back(project_to_boundary(q));
        }
        break;
      }
    }
    return pts;
  }

 private:
  void radial_jet(const Vec& x, double sign, GeometryJet& jet) const {
    // gamma = sign * x / r ; dgamma = sign (I - xhat xhat)/r and the
    // corresponding closed-form second derivatives.
    double r = x.norm();
    Vec xh = x / r;
    const int n = dim_;
    jet.gamma = sign * xh;
    jet.dgamma = sign * (Mat::Identity(n, n) - xh * xh.transpose()) / r;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double del_ki = (k == i), del_kj = (k == j), del_ij = (i == j);
          jet.d2gamma[k](i, j) =
              sign * (-(del_ki * xh[j] + del_kj * xh[i] + del_ij * xh[k]) +
                      3.0 * xh[i] * xh[j] * xh[k]) /
              (r * r);
        }
  }

  Vec project_to_boundary(const Vec& x) const {
    Vec y = x;
    for (int it = 0; it < 200; ++it) {
      double f = ls_.phi(y);
      Vec g = ls_.grad(y);
      double g2 = g.squaredNorm();
      if (g2 < 1e-30) throw ProjectionDiverged("vanishing level-set gradient");
      Vec ynew = y - (f / g2) * g;
      // pull tangentially toward x so the fixed point is the closest point
      Vec nh = g / std::sqrt(g2);
      Vec tang = (x - ynew) - (x - ynew).dot(nh) * nh;
      ynew += tang;
      if ((ynew - y).norm() < 1e-14 * (1.0 + x.norm()) &&
          std::abs(ls_.phi(ynew)) < 1e-12) {
        return ynew;
      }
      y = ynew;
    }
    if (std::abs(ls_.phi(y)) < 1e-9) return y;
    throw ProjectionDiverged("closest-point iteration did not converge");
  }

  void level_set_jet(const Vec& x, GeometryJet& jet) const {
    const int n = dim_;
    auto gamma_at = [&](const Vec& q) -> Vec {
      Vec y = project_to_boundary(q);
      double s = ls_.phi(q) <= 0.0 ? 1.0 : -1.0;
      double d = s * (q - y).norm();
      if (std::abs(d) < 1e-12) {
        Vec g = ls_.grad(q);
        return -g / g.norm();
      }
      return (q - y) / d;
    };
    jet.gamma = gamma_at(x);
    // central differences with one Richardson step
    double h = 1e-5 * (1.0 + x.norm());
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Zero(n);
      e[i] = 1.0;
      Vec d1 = (gamma_at(x + h * e) - gamma_at(x - h * e)) / (2.0 * h);
      Vec d2 = (gamma_at(x + 0.5 * h * e) - gamma_at(x - 0.5 * h * e)) / h;
      jet.dgamma.col(i) = (4.0 * d2 - d1) / 3.0;
    }
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          auto gk = [&](const Vec& q) { return gamma_at(q)[k]; };
          Vec ei = Vec::Zero(n), ej = Vec::Zero(n);
          ei[i] = 1.0;
          ej[j] = 1.0;
          double val;
          if (i == j) {
            val = (gk(x + h * ei) - 2.0 * gk(x) + gk(x - h * ei)) / (h * h);
          } else {
            val = (gk(x + h * ei + h * ej) - gk(x + h * ei - h * ej) -
                   gk(x - h * ei + h * ej) + gk(x - h * ei - h * ej)) /
                  (4.0 * h * h);
          }
          jet.d2gamma[k](i, j) = val;
          jet.d2gamma[k](j, i) = val;
        }
  }

  double estimate_r0() const {
    // reciprocal of the largest principal curvature over a boundary sample
    double max_kappa = 1e-12;
    for (const Vec& y : boundary_points(64)) {
      Vec g = ls_.grad(y);
      double gn = g.norm();
      Mat H;
      if (ls_.hess) {
        H = ls_.hess(y);
      } else {
        int n = dim_;
        H = Mat(n, n);
        double h = 1e-5 * (1.0 + y.norm());
        for (int i = 0; i < n; ++i) {
          Vec e = Vec::Zero(n);
          e[i] = 1.0;
          H.col(i) = (ls_.grad(y + h * e) - ls_.grad(y - h * e)) / (2.0 * h);
        }
      }
      Vec nh = g / gn;
      Mat P = Mat::Identity(dim_, dim_) - nh * nh.transpose();
      Mat S = P * H * P / gn;
      Eigen::SelfAdjointEigenSolver<Mat> es(S);
      for (int i = 0; i < dim_; ++i)
        max_kappa = std::max(max_kappa, std::abs(es.eigenvalues()[i]));
    }
    return 1.0 / max_kappa;
  }

  DomainKind kind_ = DomainKind::interval;
  double a_ = 0.0, b_ = 1.0;
  int dim_ = 1;
  double r0_ = 0.5;
  bool parabolic_ = false;
  double time_horizon_ = 0.0;
  LevelSetSpec ls_;
};

}  // namespace oblab
