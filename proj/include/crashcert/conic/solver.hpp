#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcert/conic/program.hpp"
#include "crashcert/conic/schur.hpp"

namespace crashcert {

enum class SolveStatus { optimal, near_optimal, infeasible, unbounded, numerical_failure };

std::string to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);
inline bool is_solved(SolveStatus s) {
  return s == SolveStatus::optimal || s == SolveStatus::near_optimal;
}

struct SolverSettings {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iterations = 200;
  /// Iterates meeting this looser tolerance are reported as near_optimal
  /// when the solver stalls or runs out of iterations.
  double near_tol = 1e-5;
  int verbosity = 0;
  SchurKernel kernel = SchurKernel::structured;

  /// Throws std::invalid_argument unless all tolerances are positive.
  void validate() const;
};

/// Applies CRASHCERT_SOLVER_GAP (and CRASHCERT_SOLVER_FEAS,
/// CRASHCERT_SOLVER_MAXIT) from the environment when set.
SolverSettings settings_from_env(SolverSettings base = {});

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;  // |Ax - b| / (1 + |b|)
  double dual_residual = 0.0;    // |A'y + s - c| / (1 + |c|)
  double relative_gap = 0.0;     // |c.x - b.y| / (1 + |c.x| + |b.y|)
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double seconds = 0.0;
  double schur_seconds = 0.0;
  double factor_seconds = 0.0;
  int presolve_eliminated_rows = 0;
  int presolve_dropped_columns = 0;
  std::string message;
};

/// Primal x, dual y, dual slack s in the program's variable layout. For
/// infeasible programs y, s hold a Farkas certificate; for unbounded ones
/// x holds an improving ray.
struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> s;
  /// c.x + offset; present only for optimal / near_optimal.
  std::optional<double> objective;
  SolverStats stats;
};

/// Homogeneous self-dual interior-point method (HKM direction, Mehrotra
/// predictor-corrector) for programs over free, nonnegative and PSD cones.
/// Never throws on numerical trouble; reports numerical_failure instead.
/// Throws std::invalid_argument for malformed programs.
ConicSolution solve_conic(const ConicProgram& prog,
                          const SolverSettings& settings = {});

nlohmann::json to_json(const ConicSolution& sol);

}  // namespace crashcert
