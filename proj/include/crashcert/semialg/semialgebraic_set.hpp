#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "crashcert/poly/polynomial.hpp"

namespace crashcert {

/// Tolerance used for numeric set membership.
inline constexpr double kMembershipTolerance = 1e-9;

/// {y : g_i(y) >= 0, h_j(y) = 0} over the variables of the blocks it
/// constrains. The carrier space may hold extra (unconstrained) blocks.
class BasicSemialgebraicSet {
 public:
  BasicSemialgebraicSet() = default;
  BasicSemialgebraicSet(VariableSpace space, BlockMask blocks)
      : space_(space), blocks_(blocks) {}

  const VariableSpace& space() const { return space_; }
  BlockMask blocks() const { return blocks_; }
  const std::vector<Polynomial>& inequalities() const { return ineqs_; }
  const std::vector<Polynomial>& equalities() const { return eqs_; }
  /// Squared radius R of a ball {|y|^2 <= R} known to contain the set.
  std::optional<double> declared_radius() const { return radius_; }
  /// True when the constraints already certify boundedness (a ball or a
  /// quadratic bound per coordinate), so no redundant ball is needed.
  bool archimedean() const { return archimedean_; }
  bool augmented() const { return augmented_; }

  void add_inequality(Polynomial g);
  void add_equality(Polynomial h);
  void set_declared_radius(double r_sq) { radius_ = r_sq; }
  void set_archimedean(bool a) { archimedean_ = a; }
  void mark_augmented() { augmented_ = true; }

  /// Variable ids (in space()) belonging to the constrained blocks.
  std::vector<int> variables() const;

  /// g_i(y) >= -tol for all i and |h_j(y)| <= tol for all j. `point`
  /// is ordered like space().
  bool contains(std::span<const double> point,
                double tol = kMembershipTolerance) const;

  /// Equalities of the form a*y_k + b = 0 pin a coordinate; returns those
  /// bindings (used to eliminate point sets by substitution).
  std::vector<Binding> fixed_coordinates() const;

  /// Same constraints re-expressed over a larger space.
  BasicSemialgebraicSet embedded(const VariableSpace& target) const;

 private:
  VariableSpace space_;
  BlockMask blocks_ = 0;
  std::vector<Polynomial> ineqs_;
  std::vector<Polynomial> eqs_;
  std::optional<double> radius_;
  bool archimedean_ = false;
  bool augmented_ = false;
  // Variables bounded by some inequality whose quadratic part is a negative
  // diagonal form (balls, boxes); full coverage certifies boundedness.
  std::uint32_t bounded_vars_ = 0;
};

/// Product of the coordinate boxes: (y_i - lo_i)(hi_i - y_i) >= 0 per state.
BasicSemialgebraicSet box_set(std::span<const double> lo,
                              std::span<const double> hi);
/// radius_sq - |x - c|^2 >= 0.
BasicSemialgebraicSet ball_set(std::span<const double> center, double radius_sq);
/// b - a.x >= 0.
BasicSemialgebraicSet halfspace(std::span<const double> a, double b);
/// x_i - p_i = 0 for every state.
BasicSemialgebraicSet point_set(std::span<const double> p);
/// t (T - t) >= 0 over the time block of `space`.
BasicSemialgebraicSet time_interval(const VariableSpace& space, double horizon);
/// z (cap - z) >= 0 over the peak block of `space`.
BasicSemialgebraicSet peak_interval(const VariableSpace& space, double cap);

/// Both sets over the same blocks; concatenates constraints.
BasicSemialgebraicSet intersect(const BasicSemialgebraicSet& a,
                                const BasicSemialgebraicSet& b);
/// Cartesian product over disjoint blocks, expressed in the merged space.
BasicSemialgebraicSet product(const BasicSemialgebraicSet& a,
                              const BasicSemialgebraicSet& b);
/// Appends the redundant ball r_sq - |y|^2 >= 0 over the set's variables.
BasicSemialgebraicSet archimedean_augment(const BasicSemialgebraicSet& s,
                                          double r_sq);

/// Parses a state-block set. Accepted forms:
///   {"ineqs":[poly...], "eqs":[poly...], "radius": R}
///   {"box":{"lo":[...],"hi":[...]}}     {"ball":{"center":[...],"radius_sq":r}}
///   {"halfspace":{"a":[...],"b":b}}     {"point":[...]}
///   {"all_of":[set...]}
/// Polynomials may omit "vars"; they then live over n_states states.
BasicSemialgebraicSet set_from_json(const nlohmann::json& j, int n_states);
nlohmann::json to_json(const BasicSemialgebraicSet& s);

}  // namespace crashcert
