#include "tstokes/jet.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace tstokes::jet {

void mul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = mul_coeff(a, b, k);
}

double mul_coeff(std::span<const double> a, std::span<const double> b, std::size_t k) {
  double s = 0.0;
  const std::size_t lo = k + 1 > b.size() ? k + 1 - b.size() : 0;
  const std::size_t hi = std::min(k, a.size() - 1);
  for (std::size_t j = lo; j <= hi; ++j) s += a[j] * b[k - j];
  return s;
}

void pow(std::span<const double> f, double p, std::span<double> out) {
  if (out.empty()) return;
  assert(f[0] > 0.0);
  const double f0 = f[0];
  out[0] = std::pow(f0, p);
  for (std::size_t k = 1; k < out.size(); ++k) {
    double s = 0.0;
    const std::size_t jmax = std::min(k, f.size() - 1);
    for (std::size_t j = 1; j <= jmax; ++j) {
      s += ((p + 1.0) * static_cast<double>(j) - static_cast<double>(k)) * f[j] * out[k - j];
    }
    out[k] = s / (static_cast<double>(k) * f0);
  }
}

double evaluate(std::span<const double> c, double t) {
  double s = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) s = s * t + c[k];
  return s;
}

Series& Series::operator+=(const Series& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
  for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] += o.c_[k];
  return *this;
}

Series& Series::operator-=(const Series& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
  for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] -= o.c_[k];
  return *this;
}

Series& Series::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

Series operator*(const Series& a, const Series& b) {
  Series out(std::min(a.order(), b.order()));
  mul(a.c_, b.c_, out.c_);
  return out;
}

Series Series::pow(double p) const {
  Series out(order());
  jet::pow(c_, p, out.c_);
  return out;
}

// ---------------------------------------------------------------------------

MonomialBasis::MonomialBasis(int order) : order_(order) {
  if (order < 0) throw std::invalid_argument("negative jet order");
  const auto side = static_cast<std::size_t>(order + 1);
  lookup_.assign(side * side * side, static_cast<std::size_t>(-1));
  prefix_.resize(side);
  for (int d = 0; d <= order; ++d) {
    for (int a = d; a >= 0; --a) {
      for (int b = d - a; b >= 0; --b) {
        const int c = d - a - b;
        lookup_[(static_cast<std::size_t>(a) * side + static_cast<std::size_t>(b)) * side +
                static_cast<std::size_t>(c)] = exps_.size();
        exps_.push_back({a, b, c});
      }
    }
    prefix_[static_cast<std::size_t>(d)] = exps_.size();
  }
}

std::size_t MonomialBasis::index(const MultiIndex& a) const {
  const auto side = static_cast<std::size_t>(order_ + 1);
  return lookup_[(static_cast<std::size_t>(a[0]) * side + static_cast<std::size_t>(a[1])) * side +
                 static_cast<std::size_t>(a[2])];
}

std::shared_ptr<const MonomialBasis> MonomialBasis::get(int order) {
  static std::mutex mu;
  static std::map<int, std::shared_ptr<const MonomialBasis>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[order];
  if (!slot) slot = std::make_shared<const MonomialBasis>(order);
  return slot;
}

MultiJet::MultiJet(int order) : MultiJet(MonomialBasis::get(order)) {}

MultiJet::MultiJet(std::shared_ptr<const MonomialBasis> basis)
    : basis_(std::move(basis)), c_(basis_->size(), 0.0) {}

MultiJet MultiJet::constant(int order, double c) {
  MultiJet j(order);
  j.c_[0] = c;
  return j;
}

MultiJet MultiJet::variable(int order, int axis, double value) {
  MultiJet j(order);
  j.c_[0] = value;
  if (order >= 1) {
    MultiIndex e{0, 0, 0};
    e[static_cast<std::size_t>(axis)] = 1;
    j.c_[j.basis_->index(e)] = 1.0;
  }
  return j;
}

double MultiJet::coefficient(const MultiIndex& a) const {
  if (degree(a) > order() || a[0] < 0 || a[1] < 0 || a[2] < 0) return 0.0;
  return c_[basis_->index(a)];
}

double MultiJet::derivative(const MultiIndex& a) const {
  double fact = 1.0;
  for (int axis = 0; axis < 3; ++axis)
    for (int k = 2; k <= a[static_cast<std::size_t>(axis)]; ++k) fact *= k;
  return fact * coefficient(a);
}

MultiJet& MultiJet::operator+=(const MultiJet& o) {
  assert(o.order() == order());
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

MultiJet& MultiJet::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}

MultiJet operator*(const MultiJet& a, const MultiJet& b) {
  assert(a.order() == b.order());
  const MonomialBasis& basis = *a.basis_;
  const int n = basis.order();
  MultiJet out(a.basis_);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double ai = a.c_[i];
    if (ai == 0.0) continue;
    const MultiIndex& ea = basis.exponent(i);
    const std::size_t jmax = basis.prefix(n - degree(ea));
    for (std::size_t j = 0; j < jmax; ++j) {
      const double bj = b.c_[j];
      if (bj == 0.0) continue;
      const MultiIndex& eb = basis.exponent(j);
      out.c_[basis.index({ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]})] += ai * bj;
    }
  }
  return out;
}

MultiJet MultiJet::pow(double p) const {
  const double f0 = c_[0];
  assert(f0 > 0.0);
  // f = f0 (1 + t) with t nilpotent of index order+1.
  MultiJet t = *this;
  t.c_[0] = 0.0;
  t *= 1.0 / f0;
  const int n = order();
  std::vector<double> binom(static_cast<std::size_t>(n) + 1);
  binom[0] = 1.0;
  for (int m = 1; m <= n; ++m)
    binom[static_cast<std::size_t>(m)] = binom[static_cast<std::size_t>(m - 1)] * (p - (m - 1)) / m;
  MultiJet acc = constant(n, binom[static_cast<std::size_t>(n)]);
  for (int m = n - 1; m >= 0; --m) {
    acc = acc * t;
    acc.c_[0] += binom[static_cast<std::size_t>(m)];
  }
  acc *= std::pow(f0, p);
  return acc;
}

}  // namespace tstokes::jet
