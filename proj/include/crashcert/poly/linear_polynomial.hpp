#pragma once

#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "crashcert/poly/polynomial.hpp"

namespace crashcert {

/// constant + sum_k coef_k * y[id_k] over a global decision vector y.
/// The linear part is kept sorted by id with no zero coefficients.
class AffineExpr {
 public:
  using Entry = std::pair<int, double>;

  AffineExpr() = default;
  explicit AffineExpr(double constant) : constant_(constant) {}
  static AffineExpr variable(int id, double coef = 1.0);

  double constant() const { return constant_; }
  const std::vector<Entry>& linear() const { return linear_; }
  bool is_zero() const { return constant_ == 0.0 && linear_.empty(); }
  bool is_constant() const { return linear_.empty(); }

  /// this += scale * o
  void add_scaled(const AffineExpr& o, double scale);
  void add_constant(double c);
  AffineExpr& operator*=(double s);

  double evaluate(const std::function<double(int)>& value_of) const;
  double evaluate(std::span<const double> values) const;

  bool operator==(const AffineExpr&) const = default;

 private:
  double constant_ = 0.0;
  std::vector<Entry> linear_;
};

/// Polynomial whose coefficients are affine in decision variables. Carrier
/// for the unknown polynomials of an SOS program.
class LinearPolynomial {
 public:
  using TermMap = std::map<Exponent, AffineExpr, GradedOrder>;

  LinearPolynomial() = default;
  explicit LinearPolynomial(VariableSpace space) : space_(space) {}
  /// Constant (decision-free) polynomial.
  explicit LinearPolynomial(const Polynomial& p);

  /// sum_k y[ids[k]] * x^monomials[k]
  static LinearPolynomial from_variables(const VariableSpace& space,
                                         std::span<const Exponent> monomials,
                                         std::span<const int> ids);

  const VariableSpace& space() const { return space_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  int degree_in(int var) const;
  bool depends_on(int var) const { return degree_in(var) > 0; }

  void add_term(const Exponent& e, const AffineExpr& c, double scale = 1.0);

  LinearPolynomial& operator+=(const LinearPolynomial& o);
  LinearPolynomial& operator-=(const LinearPolynomial& o);
  LinearPolynomial& operator+=(const Polynomial& o);
  LinearPolynomial& operator-=(const Polynomial& o);
  LinearPolynomial& operator*=(double s);
  /// Adds an affine scalar (e.g. -gamma) to the constant monomial.
  LinearPolynomial& add_constant(const AffineExpr& c, double scale = 1.0);

  friend LinearPolynomial operator+(LinearPolynomial a, const LinearPolynomial& b) {
    return a += b;
  }
  friend LinearPolynomial operator-(LinearPolynomial a, const LinearPolynomial& b) {
    return a -= b;
  }
  friend LinearPolynomial operator*(LinearPolynomial a, double s) { return a *= s; }
  friend LinearPolynomial operator*(double s, LinearPolynomial a) { return a *= s; }
  friend LinearPolynomial operator*(const LinearPolynomial& a, const Polynomial& b);
  friend LinearPolynomial operator*(const Polynomial& b, const LinearPolynomial& a) {
    return a * b;
  }

  /// Substitutes numeric decision values, yielding an ordinary polynomial.
  Polynomial evaluate(const std::function<double(int)>& value_of) const;
  Polynomial evaluate(std::span<const double> values) const;

  bool operator==(const LinearPolynomial&) const = default;

 private:
  void check_space(const VariableSpace& s) const;

  VariableSpace space_;
  TermMap terms_;
};

LinearPolynomial differentiate(const LinearPolynomial& p, int var);
LinearPolynomial substitute(const LinearPolynomial& p,
                            std::span<const Binding> bindings);
LinearPolynomial embed(const LinearPolynomial& p, const VariableSpace& target);

/// (d/dt + f . grad_x) v. `f` holds one polynomial per state, all in the
/// space of `v`; the time term is skipped when the space has no t.
LinearPolynomial lie_derivative(const LinearPolynomial& v,
                                std::span<const Polynomial> f);

}  // namespace crashcert
