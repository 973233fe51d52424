#pragma once

#include "tstokes/jet.hpp"
#include "tstokes/types.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace tstokes {

inline constexpr int kMaxDerivativeOrder = 12;

// Oseen tensor U(x) = (I + x x^T / |x|^2) / (8 pi |x|). Throws
// singular_evaluation at x = 0.
Mat3 oseen(const Vec3& x);

// Regularized Stokeslet blob
//   U_eps(x) = [ (r^2 + 2 eps^2) I + x x^T ] / (8 pi (r^2 + eps^2)^{3/2}).
// Exactly divergence free, even, finite at the origin (= I / (4 pi eps)).
Mat3 oseen_regularized(const Vec3& x, double eps);

// Pressure kernel P(x) = -x / (4 pi |x|^2).
Vec3 pressure_kernel(const Vec3& x);

// Exact partial derivative d^alpha U(x) via three-variable jet arithmetic on
// |x|^{-1} and |x|^{-3}. eps > 0 differentiates the blob instead.
Mat3 oseen_derivative(const Vec3& x, const jet::MultiIndex& alpha, double eps = 0.0,
                      int max_order = kMaxDerivativeOrder);

// All entries of U around x as jets of the given total order; entry (i, j)
// lives at index 3 * i + j.
std::array<jet::MultiJet, 9> oseen_jets(const Vec3& x, int order, double eps = 0.0);

// Smallest K such that |d^alpha U(x)| |x|^{1+|alpha|} / |alpha|! <= K^{|alpha|}
// over sampled directions and 1 <= |alpha| <= max_order (the order-zero
// scale sup |U(x)| |x| is used as a floor). Spectral norm throughout.
double derivative_bound_probe(int max_order, std::size_t samples, std::uint64_t seed);

struct KernelConfig {
  double regularization_epsilon = 0.0;
  // 0 means "not measured yet": derivative_constant() probes on demand.
  double derivative_constant_K = 0.0;

  void validate() const;
  bool singular() const { return regularization_epsilon == 0.0; }
  Mat3 matrix(const Vec3& x) const;
  double derivative_constant() const;
};

// U_eps(d) (-e3): the velocity induced at d by a unit downward point force
// at the origin. No checks; eps2 = 0 requires d != 0.
inline Vec3 stokeslet_down(const Vec3& d, double eps2) {
  const double r2 = d.squaredNorm();
  const double s = r2 + eps2;
  const double inv_s = 1.0 / s;
  const double b = inv_s / std::sqrt(s);
  const double a = (r2 + 2.0 * eps2) * b;
  constexpr double c = -1.0 / (8.0 * kPi);
  const double dz = d.z() * b;
  return Vec3(c * d.x() * dz, c * d.y() * dz, c * (a + d.z() * dz));
}

// (1/2) sum_ab M_ab d_a d_b [U_eps(d)(-e3)] for a symmetric second moment M:
// the quadrupole term of a cluster expanded about its centroid.
inline Vec3 stokeslet_down_quadrupole(const Vec3& d, const Mat3& m, double eps2) {
  const double s = d.squaredNorm() + eps2;
  const double inv_s = 1.0 / s;
  const double s32 = inv_s / std::sqrt(s);
  const double s52 = s32 * inv_s;
  const double s72 = s52 * inv_s;
  // U_eps(d) = (A(s) Id + B(s) d d^T) / (8 pi), s = |d|^2 + eps^2.
  const double b = s32;
  const double b1 = -1.5 * s52;
  const double b2 = 3.75 * s72;
  const double a1 = -0.5 * s32 - 1.5 * eps2 * s52;
  const double a2 = 0.75 * s52 + 3.75 * eps2 * s72;
  const double tr = m.trace();
  const Vec3 md = m * d;
  const double dmd = d.dot(md);
  Vec3 h = (2.0 * tr * b1 + 4.0 * dmd * b2) * d.z() * d;
  h += 4.0 * b1 * (d.z() * md + md.z() * d);
  h += 2.0 * b * m.col(2);
  h.z() += 2.0 * tr * a1 + 4.0 * dmd * a2;
  return (-0.5 / (8.0 * kPi)) * h;
}

}  // namespace tstokes
