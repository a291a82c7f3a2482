#pragma once

#include <vector>

#include <Eigen/Dense>

#include "crashcert/conic/program.hpp"

namespace crashcert {

enum class SchurKernel {
  /// Entry-by-entry formula over the sparse rows, single-threaded. Slow but
  /// obviously correct; kept as the test oracle for `structured`.
  reference,
  /// OpenMP kernel exploiting the Gram-template hints (GEMM per product
  /// group, aggregation across template instances). Cones without hints
  /// fall back to a parallel version of the reference formula.
  structured,
};

/// Scaling of one interior-point iterate: x/s for nonnegative variables
/// and (X, S^-1) for each PSD cone, in program order.
struct SchurWeights {
  Eigen::VectorXd lin;
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::MatrixXd> Sinv;
};

/// Assembles M = A_c H A_c^T for the HKM scaling H(D) = sym(X D S^-1)
/// (diag(x/s) on the nonnegative orthant), where A_c is the cone part of
/// the equality matrix restricted to a selection of rows.
class SchurAssembler {
 public:
  /// `row_map[r]` is the new index of program row r, or -1 when the row is
  /// dropped (dropped rows must not touch any cone variable).
  SchurAssembler(const ConicProgram& prog, const std::vector<int>& row_map,
                 int num_rows);

  int num_rows() const { return m_; }
  int num_lin() const { return static_cast<int>(lin_cols_.size()); }
  int num_psd() const { return static_cast<int>(psd_.size()); }
  int psd_order(int k) const { return psd_[k].order; }
  /// Number of PSD cones covered by structure hints.
  int num_structured() const;

  /// Writes the lower triangle of M (the strict upper part is zeroed).
  void assemble(const SchurWeights& w, SchurKernel kernel,
                Eigen::MatrixXd& M) const;

 private:
  struct LinColumn {
    std::vector<int> rows;
    std::vector<double> vals;
  };
  // Rows of one PSD cone, each a sparse symmetric matrix given by its
  // lower entries (i >= j) with matrix (not svec) coefficients.
  struct PsdCone {
    int order = 0;
    std::vector<int> rows;  // distinct rows touching the cone, ascending
    std::vector<int> ptr;
    std::vector<int> ei, ej;
    std::vector<double> ea;
    bool structured = false;
  };
  struct PreparedBlock {
    int order = 0;
    int num_groups = 0;
    std::vector<int> entry_group;    // lower entries in svec order
    std::vector<int> pair_ptr;       // per group: full (k, l) pairs
    std::vector<int> pair_k, pair_l;
    const GramTemplate::Block* source = nullptr;
  };
  struct PreparedGroup {
    int coef_dim = 0;
    std::vector<PreparedBlock> blocks;
    std::vector<std::vector<int>> instance_psd;  // internal PSD indices
    std::vector<std::vector<int>> layer_rows;    // mapped rows
    std::vector<double> coef;                    // instances x layers
  };

  void generic_cone(const PsdCone& cone, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd& Sinv, bool parallel,
                    Eigen::MatrixXd& M) const;
  void structured_group(const PreparedGroup& g, const SchurWeights& w,
                        Eigen::MatrixXd& M) const;

  int m_ = 0;
  std::vector<LinColumn> lin_cols_;
  std::vector<PsdCone> psd_;
  std::vector<PreparedGroup> groups_;
};

}  // namespace crashcert
