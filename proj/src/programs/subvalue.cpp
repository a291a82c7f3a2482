#include "crashcert/programs/subvalue.hpp"

#include <algorithm>

namespace crashcert {

double SubvalueModel::evaluate(std::span<const double> x) const {
  double value = Xu.contains(x) ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& p : q) value = std::max(value, p.evaluate(x));
  return value;
}

double SubvalueModel::clamped(std::span<const double> x) const {
  return std::clamp(evaluate(x), 0.0, J_max);
}

}  // namespace crashcert
