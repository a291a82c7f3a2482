#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "crashcert/poly/exponent.hpp"
#include "crashcert/poly/variable_space.hpp"

namespace crashcert {

/// Coefficients with magnitude below this are dropped after arithmetic.
inline constexpr double kCoefficientCleanup = 1e-14;

/// A variable fixed to a constant, used by substitute().
struct Binding {
  int var;
  double value;
};

/// Sparse real polynomial over a VariableSpace.
class Polynomial {
 public:
  using TermMap = std::map<Exponent, double, GradedOrder>;

  Polynomial() = default;
  explicit Polynomial(VariableSpace space) : space_(space) {}

  static Polynomial constant(const VariableSpace& space, double c);
  static Polynomial variable(const VariableSpace& space, int var);
  static Polynomial monomial(const VariableSpace& space, const Exponent& e,
                             double c = 1.0);

  const VariableSpace& space() const { return space_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; the zero polynomial has degree 0.
  int degree() const;
  int degree_in(int var) const;
  bool depends_on(int var) const { return degree_in(var) > 0; }
  double coefficient(const Exponent& e) const;

  /// Adds c * x^e, merging with an existing term.
  void add_term(const Exponent& e, double c);

  double evaluate(std::span<const double> point) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  bool operator==(const Polynomial&) const = default;

  std::string to_string() const;

 private:
  void check_space(const Polynomial& o) const;

  VariableSpace space_;
  TermMap terms_;
};

Polynomial pow(const Polynomial& p, int k);

/// Formal partial derivative with respect to `var`.
Polynomial differentiate(const Polynomial& p, int var);

/// Fixes the listed variables to constants. The space is unchanged; the
/// result simply no longer depends on the bound variables.
Polynomial substitute(const Polynomial& p, std::span<const Binding> bindings);

/// Replaces `var` by scale * var + shift.
Polynomial affine_substitute(const Polynomial& p, int var, double scale,
                             double shift);

/// Re-expresses p in `target`, matching variables by role. Throws if p
/// depends on a variable that `target` does not have.
Polynomial embed(const Polynomial& p, const VariableSpace& target);

}  // namespace crashcert
