#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crashcert/conic/program.hpp"
#include "crashcert/conic/solver.hpp"
#include "crashcert/poly/linear_polynomial.hpp"
#include "crashcert/semialg/semialgebraic_set.hpp"

namespace crashcert {

/// Size of the full monomial basis of degree <= d in n variables,
/// binom(n + d, d). Throws std::invalid_argument for n < 1 or d < 0 and
/// std::overflow_error when the value exceeds 64 bits.
std::uint64_t gram_basis_size(int n_vars, int d);

/// One term of a weighted-SOS certificate: weight * basis' G basis.
struct GramBlock {
  std::vector<Exponent> basis;
  Polynomial weight;
};

/// Shape of a certificate sigma_0 + sum_i sigma_i g_i (+ sum_j theta_j h_j)
/// over a set K at degree d. Shared by every WSOS polynomial created with
/// the same (space, K, d, variables).
struct WsosShape {
  VariableSpace space;
  std::vector<int> vars;
  int degree = 0;
  std::vector<GramBlock> blocks;
  /// Equality multipliers: (h_j, monomial support of theta_j).
  std::vector<std::pair<Polynomial, std::vector<Exponent>>> thetas;
  /// Monomials of the Gram part, in graded order.
  std::vector<Exponent> coef_monomials;
  std::map<Exponent, int, GradedOrder> coef_index;
  /// Schur-kernel description of the Gram part.
  GramTemplate gram;
  /// For each Gram-part coefficient: contributing (block, svec entry, value).
  struct Contribution {
    int block;
    int entry;
    double value;
  };
  std::vector<std::vector<Contribution>> expansion;
};

/// A weighted-SOS polynomial created by the builder.
struct WsosHandle {
  int instance = -1;
  /// The certificate polynomial; affine in the builder's decision variables.
  LinearPolynomial poly;
};

enum class Sense { minimize, maximize };

/// Solved values of every decision variable of a builder.
struct SosSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  /// Objective in the builder's sense; present only when solved.
  std::optional<double> objective;
  ConicSolution conic;
  std::vector<double> values;

  double value(int id) const { return values.at(static_cast<std::size_t>(id)); }
  /// Substitutes the solved decision values. Throws std::logic_error when
  /// the program was not solved.
  Polynomial extract(const LinearPolynomial& p) const;
  double extract(const AffineExpr& e) const;
};

/// Diagnostics about the emitted conic program.
struct AssemblyInfo {
  int num_rows = 0;
  int num_free = 0;
  int num_nonneg = 0;
  std::vector<int> psd_orders;
  int structured_templates = 0;
  int unstructured_templates = 0;
  std::vector<std::string> warnings;
};

/// Registry of decision variables and constraints of an SOS program, and
/// compiler to a ConicProgram.
///
/// Weighted-SOS polynomials are represented through "virtual" coefficient
/// variables (one per monomial of the Gram part). At assembly time every
/// occurrence of a virtual variable is expanded into the Gram entries that
/// produce it, so the program has no explicit coefficient-matching rows for
/// the certificate itself. Occurrences that differ only by a monomial shift
/// and a scale (e.g. a multiplier polynomial times a fixed factor) are
/// detected and described to the Schur kernel as layers.
class ProgramBuilder {
 public:
  ProgramBuilder() = default;

  int num_variables() const { return static_cast<int>(vars_.size()); }

  /// New free scalar.
  int add_free();
  /// New nonnegative scalar.
  int add_nonneg();
  /// Polynomial with one new free coefficient per monomial of `vars` up to
  /// degree `degree`.
  LinearPolynomial free_polynomial(const VariableSpace& space,
                                   std::span<const int> vars, int degree);

  /// New weighted-SOS polynomial of degree 2d over K, in K's space. The
  /// certificate ranges over K.variables() plus `extra_vars`.
  WsosHandle wsos_polynomial(const BasicSemialgebraicSet& K, int d,
                             std::span<const int> extra_vars = {});
  /// Adds p - s == 0 for a fresh weighted-SOS s over K (embedded into p's
  /// space) of degree 2d. Throws std::invalid_argument when deg p > 2d.
  WsosHandle constrain_wsos(const LinearPolynomial& p,
                            const BasicSemialgebraicSet& K, int d,
                            const std::string& label);
  /// Coefficient-wise p == 0: one equality row per monomial of p.
  void constrain_zero(const LinearPolynomial& p, const std::string& label);
  /// e == 0.
  void constrain_equal(const AffineExpr& e, const std::string& label);

  void set_objective(const AffineExpr& e, Sense sense);

  const WsosShape& shape_of(const WsosHandle& h) const;
  int num_wsos() const { return static_cast<int>(instances_.size()); }
  /// Labels of the constraint families, in row order.
  std::vector<std::string> family_labels() const;

  ConicProgram assemble(AssemblyInfo* info = nullptr) const;
  SosSolution solve(const SolverSettings& settings = {},
                    AssemblyInfo* info = nullptr) const;
  /// Maps a conic solution of assemble() back to decision values.
  SosSolution interpret(ConicSolution sol) const;

 private:
  enum class Kind { free, nonneg, virt };
  struct Var {
    Kind kind;
    int instance;  // virtual only
    int coef;      // virtual only
  };
  struct Instance {
    int shape = 0;
    int first_virtual = 0;
  };
  struct Family {
    std::string label;
    LinearPolynomial poly;
  };

  // Column of every real variable and first column of every Gram block.
  struct Layout {
    std::vector<int> col;
    std::vector<std::vector<int>> gram_col;
    std::vector<std::vector<int>> gram_cone;
    int num_free = 0;
    int num_nonneg = 0;
    int num_cols = 0;
  };
  Layout layout() const;
  int shape_for(const BasicSemialgebraicSet& K, int d, std::vector<int> vars);
  void check_ids(const LinearPolynomial& p) const;

  std::vector<Var> vars_;
  std::vector<WsosShape> shapes_;
  std::map<std::string, int> shape_cache_;
  std::vector<Instance> instances_;
  std::vector<Family> families_;
  AffineExpr objective_;
  Sense sense_ = Sense::minimize;
};

}  // namespace crashcert
