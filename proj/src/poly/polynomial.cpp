#include "crashcert/poly/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace crashcert {

namespace {

double ipow(double base, int e) {
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

}  // namespace

Polynomial Polynomial::constant(const VariableSpace& space, double c) {
  Polynomial p(space);
  p.add_term(Exponent{}, c);
  return p;
}

Polynomial Polynomial::variable(const VariableSpace& space, int var) {
  if (var < 0 || var >= space.size()) throw std::out_of_range("variable id");
  return monomial(space, Exponent::unit(var));
}

Polynomial Polynomial::monomial(const VariableSpace& space, const Exponent& e,
                                double c) {
  Polynomial p(space);
  p.add_term(e, c);
  return p;
}

int Polynomial::degree() const {
  // Terms are graded, so the last one has maximal degree.
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

int Polynomial::degree_in(int var) const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max<int>(d, e[var]);
  return d;
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kCoefficientCleanup) terms_.erase(it);
}

double Polynomial::evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != space_.size()) {
    throw std::invalid_argument("evaluation point has length " +
                                std::to_string(point.size()) + ", expected " +
                                std::to_string(space_.size()));
  }
  const int nv = space_.size();
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double term = c;
    for (int i = 0; i < nv; ++i) {
      if (e[i] != 0) term *= ipow(point[static_cast<std::size_t>(i)], e[i]);
    }
    sum += term;
  }
  return sum;
}

void Polynomial::check_space(const Polynomial& o) const {
  if (!(space_ == o.space_)) {
    throw std::invalid_argument("polynomial variable spaces differ");
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  check_space(o);
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  check_space(o);
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (std::abs(it->second) < kCoefficientCleanup) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_space(b);
  Polynomial r(a.space_);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      auto [it, inserted] = r.terms_.try_emplace(ea + eb, ca * cb);
      if (!inserted) it->second += ca * cb;
    }
  }
  std::erase_if(r.terms_, [](const auto& kv) {
    return std::abs(kv.second) < kCoefficientCleanup;
  });
  return r;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    const double mag = std::abs(c);
    const bool unit_coeff = e.degree() > 0 && mag == 1.0;
    if (!unit_coeff) os << mag;
    bool need_star = !unit_coeff;
    for (int i = 0; i < space_.size(); ++i) {
      if (e[i] == 0) continue;
      if (need_star) os << "*";
      os << space_.name(i);
      if (e[i] > 1) os << "^" << static_cast<int>(e[i]);
      need_star = true;
    }
  }
  return os.str();
}

Polynomial pow(const Polynomial& p, int k) {
  if (k < 0) throw std::invalid_argument("negative power");
  Polynomial r = Polynomial::constant(p.space(), 1.0);
  for (int i = 0; i < k; ++i) r = r * p;
  return r;
}

Polynomial differentiate(const Polynomial& p, int var) {
  if (var < 0 || var >= p.space().size()) {
    throw std::out_of_range("unknown variable id " + std::to_string(var));
  }
  Polynomial r(p.space());
  for (const auto& [e, c] : p.terms()) {
    if (e[var] == 0) continue;
    Exponent de = e;
    de[var] = static_cast<std::uint8_t>(e[var] - 1);
    r.add_term(de, c * e[var]);
  }
  return r;
}

Polynomial substitute(const Polynomial& p, std::span<const Binding> bindings) {
  for (const auto& b : bindings) {
    if (b.var < 0 || b.var >= p.space().size()) {
      throw std::out_of_range("unknown variable id " + std::to_string(b.var));
    }
  }
  Polynomial r(p.space());
  for (const auto& [e, c] : p.terms()) {
    Exponent re = e;
    double rc = c;
    for (const auto& b : bindings) {
      rc *= ipow(b.value, e[b.var]);
      re[b.var] = 0;
    }
    r.add_term(re, rc);
  }
  return r;
}

Polynomial affine_substitute(const Polynomial& p, int var, double scale,
                             double shift) {
  if (var < 0 || var >= p.space().size()) {
    throw std::out_of_range("unknown variable id " + std::to_string(var));
  }
  Polynomial r(p.space());
  for (const auto& [e, c] : p.terms()) {
    const int k = e[var];
    // (scale*y + shift)^k = sum_j binom(k,j) scale^j shift^(k-j) y^j
    for (int j = 0; j <= k; ++j) {
      const double w = static_cast<double>(binomial(k, j)) * ipow(scale, j) *
                       ipow(shift, k - j);
      if (w == 0.0) continue;
      Exponent re = e;
      re[var] = static_cast<std::uint8_t>(j);
      r.add_term(re, c * w);
    }
  }
  return r;
}

Polynomial embed(const Polynomial& p, const VariableSpace& target) {
  if (p.space() == target) return p;
  Polynomial r(target);
  const int nv = p.space().size();
  std::vector<int> map(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) map[i] = p.space().translate(i, target);
  for (const auto& [e, c] : p.terms()) {
    Exponent re;
    for (int i = 0; i < nv; ++i) {
      if (e[i] == 0) continue;
      if (map[i] < 0) {
        throw std::invalid_argument("cannot embed: target space lacks " +
                                    p.space().name(i));
      }
      re[map[i]] = e[i];
    }
    r.add_term(re, c);
  }
  return r;
}

}  // namespace crashcert
