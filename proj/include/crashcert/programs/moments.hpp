#pragma once

#include <map>
#include <string>

#include <Eigen/Dense>

#include "crashcert/poly/polynomial.hpp"

namespace crashcert {

/// Moments of a probability measure on the states, up to a maximal degree.
/// Exponents are over VariableSpace(n).
struct MomentVector {
  std::string kind;  // "box" or "ball"
  Eigen::VectorXd lo, hi;        // box
  Eigen::VectorXd center;        // ball
  double radius = 0.0;           // ball
  /// Lebesgue volume of the support (the measure itself has mass 1).
  double volume = 1.0;
  int max_degree = 0;
  std::map<Exponent, double, GradedOrder> values;

  int n() const;
  /// Moment of x^e; throws std::out_of_range beyond max_degree.
  double moment(const Exponent& e) const;
  /// Integral of p (over VariableSpace(n) or an embedding of it) against the
  /// measure.
  double integrate(const Polynomial& p) const;
};

/// Uniform probability measure on a box.
MomentVector uniform_box_moments(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi, int max_degree);
/// Uniform probability measure on a Euclidean ball.
MomentVector uniform_ball_moments(const Eigen::VectorXd& center, double radius,
                                  int max_degree);

}  // namespace crashcert
