#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace crashcert {

enum class ConeType { free, nonneg, psd };

/// One cone of the product cone. For PSD cones `size` is the matrix order
/// and the cone owns size*(size+1)/2 consecutive variables in svec layout.
struct ConeBlock {
  ConeType type = ConeType::free;
  int size = 0;

  int num_vars() const { return type == ConeType::psd ? size * (size + 1) / 2 : size; }
  bool operator==(const ConeBlock&) const = default;
};

/// svec layout: lower triangle, column by column; the off-diagonal entry
/// (i, j), i > j, holds sqrt(2) * X(i, j) so that svec(X).svec(Y) = <X, Y>.
int svec_index(int n, int i, int j);
inline constexpr double kSqrt2 = 1.41421356237309504880;

struct SparseTriplets {
  std::vector<int> rows;
  std::vector<int> cols;
  std::vector<double> vals;

  std::size_t nnz() const { return vals.size(); }
  void add(int r, int c, double v) {
    rows.push_back(r);
    cols.push_back(c);
    vals.push_back(v);
  }
  bool operator==(const SparseTriplets&) const = default;
};

/// Optional structural description of how PSD cones enter the equality
/// rows, produced by the SOS layer and exploited by the fast Schur kernel.
///
/// A template describes one weighted-SOS polynomial s = sum_b w_b * (B_b^T
/// G_b B_b): each Gram entry (i, j) of block b belongs to a product group
/// (monomial of B_i B_j), and `psi` maps each group into the coefficient
/// space of s with the weight coefficients. Instances of a template are
/// placed into rows through shared layers: layer t sends coefficient m to
/// row layer_rows[t][m] (or -1), with instance-specific scale coef(r, t).
struct GramTemplate {
  struct Block {
    int order = 0;
    int num_groups = 0;
    /// Group of each lower-triangular entry, in svec order.
    std::vector<int> entry_group;
    /// CSR over groups: psi_ptr has num_groups + 1 entries.
    std::vector<int> psi_ptr;
    std::vector<int> psi_index;
    std::vector<double> psi_coef;
  };
  int coef_dim = 0;
  std::vector<Block> blocks;
};

struct TemplateGroup {
  int template_id = 0;
  /// instance_cones[r][b] = cone index holding block b of instance r.
  std::vector<std::vector<int>> instance_cones;
  /// layer_rows[t][m] = row for coefficient m in layer t, or -1.
  std::vector<std::vector<int>> layer_rows;
  /// Row-major (instances x layers) scale factors.
  std::vector<double> coef;
  int num_layers() const { return static_cast<int>(layer_rows.size()); }
};

struct SchurStructure {
  std::vector<GramTemplate> templates;
  std::vector<TemplateGroup> groups;
};

/// minimize c.x + offset  subject to  A x = b,  x in K (product of cones,
/// variables laid out cone after cone in the listed order).
struct ConicProgram {
  int num_rows = 0;
  std::vector<double> c;
  SparseTriplets A;
  std::vector<double> b;
  std::vector<ConeBlock> cones;
  double offset = 0.0;
  /// Not serialized; absent for programs loaded from JSON.
  std::shared_ptr<const SchurStructure> structure;

  int num_vars() const;
  /// First variable of each cone.
  std::vector<int> cone_offsets() const;
  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

/// Sparse-triplet dump; doubles round-trip exactly.
nlohmann::json to_json(const ConicProgram& p);
ConicProgram conic_program_from_json(const nlohmann::json& j);

}  // namespace crashcert
