#include "tstokes/kernel.hpp"

#include "tstokes/rng.hpp"

#include <mutex>
#include <random>
#include <sstream>

namespace tstokes {

namespace {

constexpr double kInv8Pi = 1.0 / (8.0 * kPi);

std::string describe(const Vec3& x) {
  std::ostringstream os;
  os << "(" << x.x() << ", " << x.y() << ", " << x.z() << ")";
  return os.str();
}

}  // namespace

Mat3 oseen(const Vec3& x) {
  const double r2 = x.squaredNorm();
  if (r2 == 0.0) throw Error(ErrorCode::singular_evaluation, "Oseen tensor evaluated at x = 0");
  const double r = std::sqrt(r2);
  return (Mat3::Identity() + x * x.transpose() / r2) * (kInv8Pi / r);
}

Mat3 oseen_regularized(const Vec3& x, double eps) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::invalid_parameter, "regularization length must be positive");
  }
  const double r2 = x.squaredNorm();
  const double e2 = eps * eps;
  const double s = r2 + e2;
  const double b = kInv8Pi / (s * std::sqrt(s));
  return Mat3::Identity() * ((r2 + 2.0 * e2) * b) + x * x.transpose() * b;
}

Vec3 pressure_kernel(const Vec3& x) {
  const double r2 = x.squaredNorm();
  if (r2 == 0.0) throw Error(ErrorCode::singular_evaluation, "pressure kernel evaluated at x = 0");
  return x * (-1.0 / (4.0 * kPi * r2));
}

std::array<jet::MultiJet, 9> oseen_jets(const Vec3& x, int order, double eps) {
  using jet::MultiJet;
  const std::array<MultiJet, 3> xi{MultiJet::variable(order, 0, x.x()),
                                   MultiJet::variable(order, 1, x.y()),
                                   MultiJet::variable(order, 2, x.z())};
  const double e2 = eps * eps;
  MultiJet s = MultiJet::constant(order, e2);
  for (const auto& v : xi) s += v * v;
  // A = s^{-3/2}; the isotropic part (r^2 + 2 eps^2) A reduces to 1/|x| at eps = 0.
  const MultiJet a = s.pow(-1.5);
  const MultiJet iso = (s + MultiJet::constant(order, e2)) * a;
  std::array<MultiJet, 9> out{MultiJet(order), MultiJet(order), MultiJet(order),
                              MultiJet(order), MultiJet(order), MultiJet(order),
                              MultiJet(order), MultiJet(order), MultiJet(order)};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i; j < 3; ++j) {
      MultiJet e = xi[i] * xi[j] * a;
      if (i == j) e += iso;
      e *= kInv8Pi;
      out[3 * i + j] = e;
      out[3 * j + i] = e;
    }
  }
  return out;
}

Mat3 oseen_derivative(const Vec3& x, const jet::MultiIndex& alpha, double eps, int max_order) {
  const int n = jet::degree(alpha);
  if (alpha[0] < 0 || alpha[1] < 0 || alpha[2] < 0) {
    throw Error(ErrorCode::invalid_parameter, "negative multi-index component");
  }
  const int cap = std::min(max_order, kMaxDerivativeOrder);
  if (n > cap) {
    throw Error(ErrorCode::order_overflow,
                "derivative order " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  }
  if (eps < 0.0) throw Error(ErrorCode::invalid_parameter, "negative regularization length");
  if (eps == 0.0 && x.squaredNorm() == 0.0) {
    throw Error(ErrorCode::singular_evaluation, "Oseen derivative evaluated at x = 0");
  }
  const auto jets = oseen_jets(x, n, eps);
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = jets[static_cast<std::size_t>(3 * i + j)].derivative(alpha);
  return m;
}

double derivative_bound_probe(int max_order, std::size_t samples, std::uint64_t seed) {
  if (max_order < 0) throw Error(ErrorCode::invalid_parameter, "max_order must be >= 0");
  if (max_order > kMaxDerivativeOrder) {
    throw Error(ErrorCode::order_overflow, "probe order exceeds cap");
  }
  // d^alpha U is homogeneous of degree -1-|alpha|, so unit directions suffice.
  Engine eng = make_engine(seed, "kernel.derivative_bound_probe");
  std::normal_distribution<double> gauss;
  const auto basis = jet::MonomialBasis::get(max_order);
  std::vector<double> factorial(static_cast<std::size_t>(max_order) + 1, 1.0);
  for (int k = 1; k <= max_order; ++k)
    factorial[static_cast<std::size_t>(k)] = factorial[static_cast<std::size_t>(k - 1)] * k;

  double k_hat = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    Vec3 dir(gauss(eng), gauss(eng), gauss(eng));
    const double len = dir.norm();
    if (len == 0.0) continue;
    dir /= len;
    k_hat = std::max(k_hat, spectral_norm_symmetric(oseen(dir)));
    if (max_order == 0) continue;
    const auto jets = oseen_jets(dir, max_order);
    for (std::size_t idx = 1; idx < basis->size(); ++idx) {
      const auto& alpha = basis->exponent(idx);
      Mat3 m;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = jets[static_cast<std::size_t>(3 * i + j)].derivative(alpha);
      const int n = jet::degree(alpha);
      const double scaled = spectral_norm_symmetric(m) / factorial[static_cast<std::size_t>(n)];
      k_hat = std::max(k_hat, std::pow(scaled, 1.0 / n));
    }
  }
  return k_hat;
}

void KernelConfig::validate() const {
  if (!(regularization_epsilon >= 0.0) || !std::isfinite(regularization_epsilon)) {
    throw Error(ErrorCode::invalid_parameter, "regularization_epsilon must be finite and >= 0");
  }
  if (derivative_constant_K < 0.0 || !std::isfinite(derivative_constant_K)) {
    throw Error(ErrorCode::invalid_parameter, "derivative_constant_K must be > 0 (or 0 for auto)");
  }
}

Mat3 KernelConfig::matrix(const Vec3& x) const {
  if (regularization_epsilon > 0.0) return oseen_regularized(x, regularization_epsilon);
  if (x.squaredNorm() == 0.0) {
    throw Error(ErrorCode::singular_evaluation, "singular kernel at " + describe(x));
  }
  return oseen(x);
}

double KernelConfig::derivative_constant() const {
  if (derivative_constant_K > 0.0) return derivative_constant_K;
  static std::once_flag once;
  static double cached = 0.0;
  std::call_once(once, [] { cached = derivative_bound_probe(8, 2000, 0x5eed); });
  return cached;
}

}  // namespace tstokes
