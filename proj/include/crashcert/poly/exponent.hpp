#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "crashcert/poly/variable_space.hpp"

namespace crashcert {

/// Dense multi-index. Entries past the owning space's size stay zero.
struct Exponent {
  std::array<std::uint8_t, kMaxVariables> e{};

  std::uint8_t& operator[](int i) { return e[static_cast<std::size_t>(i)]; }
  std::uint8_t operator[](int i) const { return e[static_cast<std::size_t>(i)]; }

  int degree() const {
    int d = 0;
    for (auto v : e) d += v;
    return d;
  }

  Exponent operator+(const Exponent& o) const {
    Exponent r;
    for (std::size_t i = 0; i < e.size(); ++i) {
      r.e[i] = static_cast<std::uint8_t>(e[i] + o.e[i]);
    }
    return r;
  }

  /// True when every entry of `o` is <= the matching entry here.
  bool divisible_by(const Exponent& o) const {
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (o.e[i] > e[i]) return false;
    }
    return true;
  }

  Exponent operator-(const Exponent& o) const {
    Exponent r;
    for (std::size_t i = 0; i < e.size(); ++i) {
      r.e[i] = static_cast<std::uint8_t>(e[i] - o.e[i]);
    }
    return r;
  }

  static Exponent unit(int var, int power = 1) {
    Exponent r;
    r[var] = static_cast<std::uint8_t>(power);
    return r;
  }

  bool operator==(const Exponent&) const = default;
};

/// Graded lexicographic order: total degree first, then reverse-lex on the
/// entries so that earlier variables rank higher within a degree.
struct GradedOrder {
  bool operator()(const Exponent& a, const Exponent& b) const {
    const int da = a.degree();
    const int db = b.degree();
    if (da != db) return da < db;
    return std::lexicographical_compare(b.e.begin(), b.e.end(), a.e.begin(),
                                        a.e.end());
  }
};

struct ExponentHash {
  std::size_t operator()(const Exponent& a) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : a.e) {
      h ^= v;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// All exponents over the variables listed in `vars` with total degree <= d,
/// in graded order.
std::vector<Exponent> monomials_up_to(std::span<const int> vars, int d);

/// Number of monomials of degree <= d in n variables, binom(n + d, d).
/// Throws std::overflow_error if the value does not fit in 64 bits.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

}  // namespace crashcert
