#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oblab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Evaluation point for all coefficient and boundary quantities.  In
// parabolic mode t carries the time slice; elliptic callers leave it at 0.
struct StatePoint {
  Vec x;
  double z = 0.0;
  Vec p;
  double t = 0.0;

  StatePoint() = default;
  StatePoint(Vec x_, double z_, Vec p_, double t_ = 0.0)
      : x(std::move(x_)), z(z_), p(std::move(p_)), t(t_) {}
  int dim() const { return static_cast<int>(x.size()); }
};

// A scalar value bundled with its first derivatives in x, z, p (and t).
struct FunctionJet {
  double value = 0.0;
  Vec dx;
  double dz = 0.0;
  Vec dp;
  double dt = 0.0;
};

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define OBLAB_DEFINE_ERROR(NAME)                              \
  struct NAME : Error {                                       \
    explicit NAME(const std::string& what) : Error(what) {}   \
  }

OBLAB_DEFINE_ERROR(NonMonotoneInput);
OBLAB_DEFINE_ERROR(QuadratureFailure);
OBLAB_DEFINE_ERROR(NotDini);
OBLAB_DEFINE_ERROR(OutsideCollar);
OBLAB_DEFINE_ERROR(ProjectionDiverged);
OBLAB_DEFINE_ERROR(HypothesisViolation);
OBLAB_DEFINE_ERROR(ConstantsDiverge);
OBLAB_DEFINE_ERROR(RootNotBracketed);
OBLAB_DEFINE_ERROR(NoConvergence);
OBLAB_DEFINE_ERROR(IntegrationBudgetExceeded);
OBLAB_DEFINE_ERROR(ContractionFailure);
OBLAB_DEFINE_ERROR(DegenerateDenominator);
OBLAB_DEFINE_ERROR(NewtonDiverged);
OBLAB_DEFINE_ERROR(EllipticityLost);
OBLAB_DEFINE_ERROR(FieldMismatch);
OBLAB_DEFINE_ERROR(SchemaError);
OBLAB_DEFINE_ERROR(NoPositiveEta);

#undef OBLAB_DEFINE_ERROR

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = a + (b - a) * i / (n - 1);
  return out;
}

inline std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> out = linspace(std::log(a), std::log(b), n);
  for (double& v : out) v = std::exp(v);
  return out;
}

// Stable seed derivation for named sub-streams of one scenario seed.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline double sqr(double x) { return x * x; }

}  // namespace oblab
