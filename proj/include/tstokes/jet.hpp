#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace tstokes::jet {

// ---------------------------------------------------------------------------
// Univariate truncated power series. Coefficient k multiplies t^k; every
// operation keeps terms up to the length of its output span.
// ---------------------------------------------------------------------------

// out[k] = sum_{j<=k} a[j] b[k-j]
void mul(std::span<const double> a, std::span<const double> b, std::span<double> out);

// Coefficient k of a*b only (the incremental form of mul).
double mul_coeff(std::span<const double> a, std::span<const double> b, std::size_t k);

// out = f^p, requires f[0] > 0. Uses the recurrence obtained from f g' = p f' g.
void pow(std::span<const double> f, double p, std::span<double> out);

// Evaluate sum_k c[k] t^k by Horner.
double evaluate(std::span<const double> c, double t);

class Series {
 public:
  Series() = default;
  explicit Series(std::size_t order) : c_(order + 1, 0.0) {}
  Series(std::initializer_list<double> c) : c_(c) {}

  std::size_t order() const { return c_.size() - 1; }
  double& operator[](std::size_t k) { return c_[k]; }
  double operator[](std::size_t k) const { return c_[k]; }
  std::span<const double> coeffs() const { return c_; }
  std::span<double> coeffs() { return c_; }

  Series& operator+=(const Series& o);
  Series& operator-=(const Series& o);
  Series& operator*=(double s);

  friend Series operator+(Series a, const Series& b) { return a += b; }
  friend Series operator-(Series a, const Series& b) { return a -= b; }
  friend Series operator*(Series a, double s) { return a *= s; }
  friend Series operator*(double s, Series a) { return a *= s; }
  friend Series operator*(const Series& a, const Series& b);

  Series pow(double p) const;
  double operator()(double t) const { return evaluate(c_, t); }

 private:
  std::vector<double> c_;
};

// ---------------------------------------------------------------------------
// Three-variable Taylor jets truncated at total degree n. Used for the
// spatial derivatives of the Oseen tensor: the coefficient of h^a in
// f(x + h) equals d^a f(x) / a!.
// ---------------------------------------------------------------------------

using MultiIndex = std::array<int, 3>;

inline int degree(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

// Monomials of total degree <= order, sorted by degree, plus the index
// tables the product needs. Shared between jets of the same order.
class MonomialBasis {
 public:
  explicit MonomialBasis(int order);

  int order() const { return order_; }
  std::size_t size() const { return exps_.size(); }
  const MultiIndex& exponent(std::size_t i) const { return exps_[i]; }
  std::size_t index(const MultiIndex& a) const;
  // Number of monomials with degree <= d.
  std::size_t prefix(int d) const { return prefix_[static_cast<std::size_t>(d)]; }

  static std::shared_ptr<const MonomialBasis> get(int order);

 private:
  int order_;
  std::vector<MultiIndex> exps_;
  std::vector<std::size_t> prefix_;
  std::vector<std::size_t> lookup_;  // (order+1)^3 table
};

class MultiJet {
 public:
  explicit MultiJet(int order);
  MultiJet(std::shared_ptr<const MonomialBasis> basis);

  static MultiJet constant(int order, double c);
  // x_i + h_i as a jet about x.
  static MultiJet variable(int order, int axis, double value);

  int order() const { return basis_->order(); }
  double coefficient(const MultiIndex& a) const;
  double constant_term() const { return c_[0]; }
  // d^a f(x) = a! * coefficient(a)
  double derivative(const MultiIndex& a) const;

  MultiJet& operator+=(const MultiJet& o);
  MultiJet& operator*=(double s);
  friend MultiJet operator+(MultiJet a, const MultiJet& b) { return a += b; }
  friend MultiJet operator*(MultiJet a, double s) { return a *= s; }
  friend MultiJet operator*(const MultiJet& a, const MultiJet& b);

  // f^p for f with positive constant term, through the binomial series in
  // the nilpotent part.
  MultiJet pow(double p) const;

 private:
  std::shared_ptr<const MonomialBasis> basis_;
  std::vector<double> c_;
};

}  // namespace tstokes::jet
