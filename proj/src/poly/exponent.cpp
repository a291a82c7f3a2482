#include "crashcert/poly/exponent.hpp"

#include <limits>
#include <stdexcept>

namespace crashcert {

namespace {

void enumerate(std::span<const int> vars, std::size_t pos, int remaining,
               Exponent& current, std::vector<Exponent>& out) {
  if (pos == vars.size()) {
    out.push_back(current);
    return;
  }
  for (int p = 0; p <= remaining; ++p) {
    current[vars[pos]] = static_cast<std::uint8_t>(p);
    enumerate(vars, pos + 1, remaining - p, current, out);
  }
  current[vars[pos]] = 0;
}

}  // namespace

std::vector<Exponent> monomials_up_to(std::span<const int> vars, int d) {
  if (d < 0) return {};
  std::vector<Exponent> out;
  Exponent current;
  enumerate(vars, 0, d, current, out);
  std::sort(out.begin(), out.end(), GradedOrder{});
  return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // result * num / i is exact at every step; guard the multiplication.
    if (result > std::numeric_limits<std::uint64_t>::max() / num) {
      throw std::overflow_error("binomial coefficient overflows 64 bits");
    }
    result = result * num / i;
  }
  return result;
}

}  // namespace crashcert
