#include "crashcert/poly/variable_space.hpp"

#include <stdexcept>

#include "crashcert/poly/exponent.hpp"

namespace crashcert {

VariableSpace::VariableSpace(int n_states, int n_inputs, bool has_time,
                             bool has_z)
    : n_states_(n_states),
      n_inputs_(n_inputs),
      has_time_(has_time),
      has_z_(has_z) {
  if (n_states < 1) throw std::invalid_argument("n_states must be >= 1");
  if (n_inputs < 0) throw std::invalid_argument("n_inputs must be >= 0");
  if (size() > kMaxVariables) {
    throw std::invalid_argument("variable space exceeds " +
                                std::to_string(kMaxVariables) + " variables");
  }
}

int VariableSpace::t() const {
  if (!has_time_) throw std::out_of_range("space has no time variable");
  return 0;
}

int VariableSpace::x(int i) const {
  if (i < 0 || i >= n_states_) throw std::out_of_range("state index");
  return (has_time_ ? 1 : 0) + i;
}

int VariableSpace::z() const {
  if (!has_z_) throw std::out_of_range("space has no peak variable z");
  return (has_time_ ? 1 : 0) + n_states_;
}

int VariableSpace::w(int l) const {
  if (l < 0 || l >= n_inputs_) throw std::out_of_range("input index");
  return (has_time_ ? 1 : 0) + n_states_ + (has_z_ ? 1 : 0) + l;
}

Block VariableSpace::block_of(int var) const {
  if (var < 0 || var >= size()) throw std::out_of_range("variable id");
  int k = var;
  if (has_time_) {
    if (k == 0) return Block::time;
    --k;
  }
  if (k < n_states_) return Block::state;
  k -= n_states_;
  if (has_z_) {
    if (k == 0) return Block::peak;
    --k;
  }
  return Block::input;
}

int VariableSpace::offset_in_block(int var) const {
  switch (block_of(var)) {
    case Block::time:
    case Block::peak:
      return 0;
    case Block::state:
      return var - (has_time_ ? 1 : 0);
    case Block::input:
      return var - (has_time_ ? 1 : 0) - n_states_ - (has_z_ ? 1 : 0);
  }
  return 0;
}

int VariableSpace::translate(int var, const VariableSpace& other) const {
  const int k = offset_in_block(var);
  switch (block_of(var)) {
    case Block::time:
      return other.has_time_ ? other.t() : -1;
    case Block::peak:
      return other.has_z_ ? other.z() : -1;
    case Block::state:
      return k < other.n_states_ ? other.x(k) : -1;
    case Block::input:
      return k < other.n_inputs_ ? other.w(k) : -1;
  }
  return -1;
}

std::string VariableSpace::name(int var) const {
  const int k = offset_in_block(var);
  switch (block_of(var)) {
    case Block::time:
      return "t";
    case Block::peak:
      return "z";
    case Block::state:
      return "x" + std::to_string(k + 1);
    case Block::input:
      return "w" + std::to_string(k + 1);
  }
  return "?";
}

VariableSpace VariableSpace::merge(const VariableSpace& a,
                                   const VariableSpace& b) {
  if (a.n_states_ != b.n_states_) {
    throw std::invalid_argument("cannot merge spaces with different state counts");
  }
  if (a.n_inputs_ > 0 && b.n_inputs_ > 0 && a.n_inputs_ != b.n_inputs_) {
    throw std::invalid_argument("cannot merge spaces with different input counts");
  }
  return VariableSpace(a.n_states_, std::max(a.n_inputs_, b.n_inputs_),
                       a.has_time_ || b.has_time_, a.has_z_ || b.has_z_);
}

}  // namespace crashcert
