#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crashcert/poly/polynomial.hpp"
#include "crashcert/semialg/semialgebraic_set.hpp"

namespace crashcert {

/// Input-affine dynamics x' = f0(t,x) + sum_l w_l f_l(t,x). Every component
/// lives in VariableSpace(n, 0, /*t=*/true, /*z=*/false).
struct Dynamics {
  std::vector<Polynomial> f0;
  std::vector<std::vector<Polynomial>> f;

  int n() const { return static_cast<int>(f0.size()); }
  int num_inputs() const { return static_cast<int>(f.size()); }
  /// Max degree over f0 and the f_l (in t and x).
  int max_term_degree() const;
  /// Degree of f0 + sum w_l f_l as a polynomial in (t, x, w).
  int joint_degree() const;
  /// f evaluated at (t, x, w).
  Eigen::VectorXd evaluate(double t, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& w) const;
};

/// Polytopic cost description: Omega = {(w,z) : A w + e0 + e1 z >= 0}, with
/// z in [0, J_max]. The cost of an input is the least such z.
struct PolytopeCost {
  Eigen::MatrixXd A;
  Eigen::VectorXd e0;
  Eigen::VectorXd e1;

  int rows() const { return static_cast<int>(A.rows()); }
  /// Rows of |Gamma w + h| <= z, i.e. A = [-Gamma; Gamma], e = [z - h; z + h].
  static PolytopeCost from_gamma_h(const Eigen::MatrixXd& gamma,
                                   const Eigen::VectorXd& h);
  /// Rows lo_l <= w_l <= hi_l (cost-independent input box).
  static PolytopeCost input_box(const Eigen::VectorXd& lo,
                                const Eigen::VectorXd& hi);
  /// Stacks the rows of two descriptions over the same inputs.
  static PolytopeCost stack(const PolytopeCost& a, const PolytopeCost& b);
  /// Least z in [0, +inf) with (w, z) admissible, or +inf when no z works.
  double cost_of(const Eigen::VectorXd& w) const;
};

/// Problem data of the peak-cost crash-safety program.
struct CrashProblem {
  std::string name;
  Dynamics dynamics;
  BasicSemialgebraicSet X;
  BasicSemialgebraicSet X0;
  BasicSemialgebraicSet Xu;
  double T = 1.0;
  double J_max = 1.0;
  double Q_max = 1.0;
  PolytopeCost cost;
  /// Bounding box of X; used for variable scaling and sampling.
  Eigen::VectorXd x_lo;
  Eigen::VectorXd x_hi;
  /// Affine rescaling of (t, x, z) to [-1, 1] before assembly.
  bool scaling = true;

  int n() const { return dynamics.n(); }
  int num_inputs() const { return dynamics.num_inputs(); }
  /// Throws std::invalid_argument when the data is inconsistent.
  void validate() const;
  /// Fixed point of X0 when X0 pins every state coordinate.
  std::optional<Eigen::VectorXd> initial_point() const;
};

/// Reads a problem; errors name the offending JSON path.
CrashProblem crash_problem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CrashProblem& pb);

/// Dynamics of the Flow system with one additive input on the second state.
Dynamics flow_dynamics();

/// Built-in problems:
///   "motivating-top", "motivating-bottom": Flow with |w| <= 1 on the box
///     [-0.6,1.75]x[-1.5,1.5], half-disk unsafe set, X0 = [0;1] resp.
///     [1.2966;-1.5];
///   "halfcircle": Flow on [-2,2]^2 with the half-circle unsafe set, X0=[1;0];
///   "halfcircle-disk": as above with X0 the disk of radius 0.4 around [1;0];
///   "moon": Flow on [-2,2]^2 with the moon-shaped unsafe set, X0=[0;0].
CrashProblem preset_problem(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace crashcert
