#include "tstokes/kernel.hpp"

#include <doctest.h>

#include <map>
#include <random>

using namespace tstokes;

namespace {

// Rational function sum_terms P(x) / r^(2k+1) with P a polynomial stored as
// monomial -> coefficient. Differentiation rule:
//   d_i (P r^-(2k+1)) = (d_i P) r^-(2k+1) - (2k+1) x_i P r^-(2k+3).
using Poly = std::map<jet::MultiIndex, double>;
using Rational = std::map<int, Poly>;  // k -> numerator

Rational differentiate(const Rational& f, int axis) {
  Rational out;
  for (const auto& [k, p] : f) {
    for (const auto& [mono, c] : p) {
      if (mono[axis] > 0) {
        auto m = mono;
        m[axis] -= 1;
        out[k][m] += c * mono[axis];
      }
      auto m = mono;
      m[axis] += 1;
      out[k + 1][m] -= (2.0 * k + 1.0) * c;
    }
  }
  return out;
}

double evaluate(const Rational& f, const Vec3& x) {
  const double r = x.norm();
  double s = 0.0;
  for (const auto& [k, p] : f) {
    double v = 0.0;
    for (const auto& [mono, c] : p) v += c * std::pow(x[0], mono[0]) * std::pow(x[1], mono[1]) * std::pow(x[2], mono[2]);
    s += v / std::pow(r, 2 * k + 1);
  }
  return s;
}

// d^alpha U(x) by the polynomial recursion.
Mat3 oseen_derivative_oracle(const Vec3& x, const jet::MultiIndex& alpha) {
  Mat3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Rational f;
      if (i == j) f[0][{0, 0, 0}] = 1.0;
      jet::MultiIndex m{0, 0, 0};
      m[i] += 1;
      m[j] += 1;
      f[1][m] += 1.0;
      for (int a = 0; a < 3; ++a) {
        for (int n = 0; n < alpha[a]; ++n) f = differentiate(f, a);
      }
      out(i, j) = evaluate(f, x) / (8.0 * kPi);
    }
  }
  return out;
}

Vec3 random_point(std::mt19937_64& g, double lo, double hi) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec3(n(g), n(g), n(g)).normalized() * u(g);
}

}  // namespace

TEST_CASE("oseen substitution examples") {
  const Mat3 a = oseen(Vec3(1, 0, 0));
  CHECK((a - Vec3(2, 1, 1).asDiagonal().toDenseMatrix() / (8 * kPi)).cwiseAbs().maxCoeff() <= 1e-14);
  const Mat3 b = oseen(Vec3(0, 0, 2));
  CHECK((b - Vec3(1, 1, 2).asDiagonal().toDenseMatrix() / (16 * kPi)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("oseen is even, symmetric, positive and decays like 1/|x|") {
  std::mt19937_64 g(1);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 x = random_point(g, 1e-3, 1e3);
    const Mat3 u = oseen(x);
    CHECK((u - oseen(-x)).norm() == 0.0);
    CHECK((u - u.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat3>(u).eigenvalues().minCoeff() > 0.0);
    CHECK(spectral_norm_symmetric(u) * x.norm() <= 1.0 / (4.0 * kPi) * (1.0 + 1e-12));
  }
}

TEST_CASE("oseen at the origin is singular") {
  CHECK_THROWS_AS(oseen(Vec3::Zero()), Error);
  CHECK_THROWS_AS(pressure_kernel(Vec3::Zero()), Error);
}

TEST_CASE("regularized blob") {
  SUBCASE("closed form at the origin") {
    const double eps = 0.3;
    CHECK((oseen_regularized(Vec3::Zero(), eps) - Mat3::Identity() / (4 * kPi * eps)).norm() <= 1e-15);
  }
  SUBCASE("eps limit") {
    CHECK((oseen_regularized(Vec3(1, 0, 0), 1e-6) - oseen(Vec3(1, 0, 0))).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("far-field deviation from the singular kernel") {
    // Expanding in eps: U_eps - U = eps^2 (I - 3 xhat xhat^T) / (16 pi r^3) + O(eps^4 / r^5).
    std::mt19937_64 g(2);
    const double eps = 0.01;
    for (int k = 0; k < 1000; ++k) {
      const Vec3 x = random_point(g, 10 * eps, 10.0);
      const double r = x.norm();
      const double dev = spectral_norm_symmetric(oseen_regularized(x, eps) - oseen(x));
      CHECK(dev <= 1.05 * eps * eps / (8 * kPi * r * r * r));
    }
  }
  SUBCASE("rejects nonpositive eps") { CHECK_THROWS_AS(oseen_regularized(Vec3(1, 0, 0), 0.0), Error); }
}

TEST_CASE("pressure kernel examples") {
  CHECK((pressure_kernel(Vec3(1, 0, 0)) - Vec3(-1 / (4 * kPi), 0, 0)).norm() <= 1e-16);
  CHECK((pressure_kernel(Vec3(0, 0, -1)) - Vec3(0, 0, 1 / (4 * kPi))).norm() <= 1e-16);
  std::mt19937_64 g(3);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = random_point(g, 1.0, 1.0);
    CHECK(pressure_kernel(x).dot(x) == doctest::Approx(-1 / (4 * kPi)).epsilon(1e-14));
    CHECK((pressure_kernel(x) + pressure_kernel(-x)).norm() == 0.0);
  }
}

TEST_CASE("oseen derivatives") {
  SUBCASE("zeroth derivative") {
    const Vec3 x(0.3, -0.7, 1.1);
    CHECK((oseen_derivative(x, {0, 0, 0}) - oseen(x)).norm() <= 1e-15);
  }
  SUBCASE("hand example") {
    CHECK(oseen_derivative(Vec3(1, 0, 0), {1, 0, 0})(1, 1) == doctest::Approx(-1 / (8 * kPi)).epsilon(1e-14));
  }
  SUBCASE("matches the polynomial recursion up to order 8") {
    std::mt19937_64 g(4);
    for (int trial = 0; trial < 20; ++trial) {
      const Vec3 x = random_point(g, 0.5, 2.0);
      for (int a = 0; a <= 4; ++a) {
        for (int b = 0; a + b <= 6; ++b) {
          for (int c = 0; a + b + c <= 8; c += 2) {
            const Mat3 want = oseen_derivative_oracle(x, {a, b, c});
            const Mat3 got = oseen_derivative(x, {a, b, c});
            CHECK((got - want).norm() <= 1e-11 * (1.0 + want.norm()));
          }
        }
      }
    }
  }
  SUBCASE("order cap") { CHECK_THROWS_AS(oseen_derivative(Vec3(1, 0, 0), {13, 0, 0}), Error); }
  SUBCASE("regularized derivatives match finite differences") {
    const Vec3 x(0.2, 0.1, -0.3);
    const double eps = 0.1, h = 1e-4;
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 e = Vec3::Zero();
      e[axis] = h;
      jet::MultiIndex alpha{0, 0, 0};
      alpha[axis] = 1;
      const Mat3 fd = (oseen_regularized(x + e, eps) - oseen_regularized(x - e, eps)) / (2 * h);
      CHECK((oseen_derivative(x, alpha, eps) - fd).norm() <= 1e-6 * fd.norm());
    }
  }
}

TEST_CASE("derivative bound probe") {
  CHECK(derivative_bound_probe(0, 1000, 1) >= 1.0 / (4.0 * kPi) * (1 - 1e-12));
  const double k4 = derivative_bound_probe(4, 2000, 1);
  const double k8 = derivative_bound_probe(8, 2000, 1);
  CHECK(std::isfinite(k8));
  CHECK(k8 >= k4 * 0.95);
  const double k8b = derivative_bound_probe(8, 4000, 2);
  CHECK(std::abs(k8b / k8 - 1.0) < 0.05);
}

TEST_CASE("oseen columns are divergence free away from the origin") {
  std::mt19937_64 g(5);
  const double h = 1e-4;
  for (int k = 0; k < 50; ++k) {
    const Vec3 x = random_point(g, 0.5, 2.0);
    for (int col = 0; col < 3; ++col) {
      double div = 0.0, div_eps = 0.0;
      for (int i = 0; i < 3; ++i) {
        Vec3 e = Vec3::Zero();
        e[i] = h;
        div += (oseen(x + e)(i, col) - oseen(x - e)(i, col)) / (2 * h);
        div_eps += (oseen_regularized(x + e, 0.2)(i, col) - oseen_regularized(x - e, 0.2)(i, col)) / (2 * h);
      }
      CHECK(std::abs(div) <= 1e-7);
      CHECK(std::abs(div_eps) <= 1e-7);
    }
  }
}

TEST_CASE("quadrupole term matches the second derivative of the downward stokeslet") {
  std::mt19937_64 g(6);
  const double h = 1e-3;
  for (double eps : {0.0, 0.1}) {
    for (int k = 0; k < 20; ++k) {
      const Vec3 d = random_point(g, 1.0, 3.0);
      Mat3 m = Mat3::Random();
      m = m * m.transpose();
      // (1/2) sum_ab M_ab d_a d_b f by central second differences.
      Vec3 want = Vec3::Zero();
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          Vec3 ea = Vec3::Zero(), eb = Vec3::Zero();
          ea[a] = h;
          eb[b] = h;
          const Vec3 dab = (stokeslet_down(d + ea + eb, eps * eps) - stokeslet_down(d + ea - eb, eps * eps) -
                            stokeslet_down(d - ea + eb, eps * eps) + stokeslet_down(d - ea - eb, eps * eps)) /
                           (4 * h * h);
          want += 0.5 * m(a, b) * dab;
        }
      }
      CHECK((stokeslet_down_quadrupole(d, m, eps * eps) - want).norm() <= 1e-5 * want.norm());
    }
  }
}
