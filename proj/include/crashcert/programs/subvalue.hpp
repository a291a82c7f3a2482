#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "crashcert/poly/polynomial.hpp"
#include "crashcert/semialg/semialgebraic_set.hpp"

namespace crashcert {

/// Pointwise maximum of per-degree subvalue polynomials and the indicator of
/// the unsafe set (0 on Xu, -inf elsewhere).
struct SubvalueModel {
  std::vector<Polynomial> q;  // each over VariableSpace(n)
  BasicSemialgebraicSet Xu;
  double J_max = 1.0;
  double Q_max = 1.0;

  /// max(I_u(x), max_d q_d(x)); -infinity when x is outside Xu and there are
  /// no polynomials.
  double evaluate(std::span<const double> x) const;
  /// evaluate() clamped to [0, J_max].
  double clamped(std::span<const double> x) const;
};

}  // namespace crashcert
