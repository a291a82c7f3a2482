#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crashcert/programs/crash_problem.hpp"
#include "crashcert/programs/moments.hpp"
#include "crashcert/sos/program_builder.hpp"

namespace crashcert {

/// How the Lie constraint handles the input: over the explicit (w, z) set
/// Omega ("standard"), or with the input eliminated through polytope
/// multipliers ("robust").
enum class LieForm { standard, robust };

std::string to_string(LieForm f);
LieForm lie_form_from_string(const std::string& s);

/// Affine change of variables original = scale * scaled + shift, per
/// variable of `space`.
struct VariableScaling {
  VariableSpace space;
  std::vector<double> scale;
  std::vector<double> shift;

  /// Identity on every variable.
  static VariableScaling identity(const VariableSpace& space);
  /// Maps [0,T] x box(X) x [0,J_max] onto [-1,1] boxes; inputs untouched.
  static VariableScaling for_problem(const CrashProblem& pb,
                                     const VariableSpace& space);

  /// p(original) rewritten in scaled variables.
  Polynomial to_scaled(const Polynomial& p) const;
  /// p(scaled) rewritten in original variables.
  Polynomial to_original(const Polynomial& p) const;
  double scaled_value(int var, double original) const {
    return (original - shift[static_cast<std::size_t>(var)]) /
           scale[static_cast<std::size_t>(var)];
  }
};

/// Lie-constraint degree d~ for relaxation degree d.
int lie_degree(const CrashProblem& pb, int d, LieForm form);

/// Gram-matrix sizes of the programs.
struct GramComplexity {
  struct Entry {
    std::string label;
    std::uint64_t size = 0;
    int count = 1;
  };
  std::string program;
  int d = 0;
  int d_tilde = 0;
  std::vector<Entry> blocks;

  std::uint64_t largest() const;
};

/// Standard program: initial binom(n+1+d,d), unsafe binom(n+2+d,d),
/// Lie binom(n+L+2+d~,d~).
GramComplexity gram_complexity_standard(int n, int L, int d, int d_tilde);
/// Robust program: initial and unsafe as above, Lie binom(n+2+d~,d~), plus
/// m multiplier blocks (over both signs) of binom(n+2+(d~-1), d~-1).
GramComplexity gram_complexity_robust(int n, int m, int d, int d_tilde);
GramComplexity gram_complexity(const CrashProblem& pb, int d, LieForm form);
nlohmann::json to_json(const GramComplexity& g);

/// A built crash-safety program and the handles of its decision polynomials,
/// all in scaled coordinates over `space`.
struct CrashProgram {
  ProgramBuilder builder;
  VariableSpace space;
  VariableScaling scaling;
  LieForm form = LieForm::robust;
  bool subvalue = false;
  int d = 0;
  int d_tilde = 0;
  int gamma = -1;
  LinearPolynomial v;
  LinearPolynomial q;
  std::vector<WsosHandle> zeta;
  double measure_volume = 1.0;
};

/// Maximizes gamma with v(0,x,z) - gamma >= 0 on X0 x Z, z - v >= 0 on
/// [0,T] x Xu x Z and L_f v >= 0 on [0,T] x X x Omega.
CrashProgram build_standard_crash(const CrashProblem& pb, int d);
/// As build_standard_crash, with the Lie constraint robustified over the
/// polytope rows of pb.cost.
CrashProgram build_robust_crash(const CrashProblem& pb, int d);
/// Maximizes the integral of q against phi with v(0,x,z) - q(x) >= 0 on
/// X x Z, Q_max - q >= 0 on X, and the unsafe/Lie constraints as above.
CrashProgram build_subvalue(const CrashProblem& pb, int d,
                            const MomentVector& phi,
                            LieForm form = LieForm::robust);

/// Outcome of one solved program, with certificates in original coordinates.
struct BoundReport {
  std::string program;
  int degree = 0;
  int d_tilde = 0;
  SolveStatus status = SolveStatus::numerical_failure;
  /// gamma* (specific programs) or the objective against phi (subvalue).
  std::optional<double> bound;
  /// Subvalue objective against the Lebesgue measure on supp(phi).
  std::optional<double> objective_lebesgue;
  /// Half-width of the reported uncertainty (nonzero when near_optimal).
  double uncertainty = 0.0;
  Polynomial v;                  // over (t, x, z)
  std::optional<Polynomial> q;   // over x
  std::vector<Polynomial> zeta;  // over (t, x, z)
  double seconds = 0.0;
  GramComplexity complexity;
  AssemblyInfo assembly;
  SolverStats stats;
};

BoundReport solve_crash_program(const CrashProgram& prog,
                                const SolverSettings& settings = {});
BoundReport crash_bound(const CrashProblem& pb, int d, LieForm form,
                        const SolverSettings& settings = {});
BoundReport subvalue_bound(const CrashProblem& pb, int d, const MomentVector& phi,
                           LieForm form, const SolverSettings& settings = {});
nlohmann::json to_json(const BoundReport& r);

/// Uniform measure on X's bounding box ("box") or on the ball inscribed in
/// it ("ball", requires a cubic box).
MomentVector problem_measure(const CrashProblem& pb, const std::string& kind,
                             int max_degree);

/// Least z in [0, J_max] with |Gamma w + h| <= z for some w.
struct CorruptionResult {
  SolveStatus status = SolveStatus::numerical_failure;
  std::optional<double> z;
  Eigen::VectorXd w;
};
CorruptionResult min_corruption(const Eigen::MatrixXd& gamma,
                                const Eigen::VectorXd& h, double J_max,
                                const SolverSettings& settings = {});

/// Largest |w_l| over the cost polytope with z in [0, J_max]; throws
/// std::invalid_argument when some input is unbounded.
Eigen::VectorXd input_bounds(const PolytopeCost& cost, double J_max);

}  // namespace crashcert
