#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace crashcert {

/// Maximum number of indeterminates a polynomial may carry.
inline constexpr int kMaxVariables = 16;

/// The four variable blocks, always laid out in this order.
enum class Block : std::uint8_t { time, state, peak, input };

/// Ordered variable tuple (t, x1..xn, z, w1..wL). The time and peak
/// variables are optional; the state block is always present.
class VariableSpace {
 public:
  VariableSpace() = default;
  explicit VariableSpace(int n_states, int n_inputs = 0, bool has_time = false,
                         bool has_z = false);

  /// Full crash-program space (t, x, z, w).
  static VariableSpace full(int n_states, int n_inputs) {
    return VariableSpace(n_states, n_inputs, true, true);
  }

  int n_states() const { return n_states_; }
  int n_inputs() const { return n_inputs_; }
  bool has_time() const { return has_time_; }
  bool has_z() const { return has_z_; }
  int size() const {
    return (has_time_ ? 1 : 0) + n_states_ + (has_z_ ? 1 : 0) + n_inputs_;
  }

  // Variable indices. Each throws std::out_of_range if the variable is absent.
  int t() const;
  int x(int i) const;
  int z() const;
  int w(int l) const;

  Block block_of(int var) const;
  /// Position of `var` within its block (0 for t and z).
  int offset_in_block(int var) const;
  /// Index of the same role in `other`, or -1 when `other` lacks it.
  int translate(int var, const VariableSpace& other) const;
  std::string name(int var) const;

  /// Union of blocks. State and input counts must agree where both present.
  static VariableSpace merge(const VariableSpace& a, const VariableSpace& b);

  bool operator==(const VariableSpace&) const = default;

 private:
  int n_states_ = 1;
  int n_inputs_ = 0;
  bool has_time_ = false;
  bool has_z_ = false;
};

/// Bit mask over blocks, used to track which blocks a set constrains.
using BlockMask = std::uint8_t;
inline constexpr BlockMask block_bit(Block b) {
  return static_cast<BlockMask>(1u << static_cast<unsigned>(b));
}

}  // namespace crashcert
