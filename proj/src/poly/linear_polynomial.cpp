#include "crashcert/poly/linear_polynomial.hpp"

#include <cmath>
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

AffineExpr AffineExpr::variable(int id, double coef) {
  AffineExpr a;
  if (coef != 0.0) a.linear_.emplace_back(id, coef);
  return a;
}

void AffineExpr::add_constant(double c) {
  constant_ += c;
  if (std::abs(constant_) < kCoefficientCleanup) constant_ = 0.0;
}

void AffineExpr::add_scaled(const AffineExpr& o, double scale) {
  if (scale == 0.0) return;
  add_constant(o.constant_ * scale);
  if (o.linear_.empty()) return;
  if (linear_.empty()) {
    linear_.reserve(o.linear_.size());
    for (const auto& [id, c] : o.linear_) {
      const double v = c * scale;
      if (std::abs(v) >= kCoefficientCleanup) linear_.emplace_back(id, v);
    }
    return;
  }
  std::vector<Entry> merged;
  merged.reserve(linear_.size() + o.linear_.size());
  auto a = linear_.begin();
  auto b = o.linear_.begin();
  auto push = [&](int id, double v) {
    if (std::abs(v) >= kCoefficientCleanup) merged.emplace_back(id, v);
  };
  while (a != linear_.end() || b != o.linear_.end()) {
    if (b == o.linear_.end() || (a != linear_.end() && a->first < b->first)) {
      merged.push_back(*a++);
    } else if (a == linear_.end() || b->first < a->first) {
      push(b->first, b->second * scale);
      ++b;
    } else {
      push(a->first, a->second + b->second * scale);
      ++a;
      ++b;
    }
  }
  linear_ = std::move(merged);
}

AffineExpr& AffineExpr::operator*=(double s) {
  if (s == 0.0) {
    constant_ = 0.0;
    linear_.clear();
    return *this;
  }
  constant_ *= s;
  if (std::abs(constant_) < kCoefficientCleanup) constant_ = 0.0;
  std::vector<Entry> kept;
  kept.reserve(linear_.size());
  for (auto [id, c] : linear_) {
    c *= s;
    if (std::abs(c) >= kCoefficientCleanup) kept.emplace_back(id, c);
  }
  linear_ = std::move(kept);
  return *this;
}

double AffineExpr::evaluate(const std::function<double(int)>& value_of) const {
  double v = constant_;
  for (const auto& [id, c] : linear_) v += c * value_of(id);
  return v;
}

double AffineExpr::evaluate(std::span<const double> values) const {
  double v = constant_;
  for (const auto& [id, c] : linear_) {
    v += c * values[static_cast<std::size_t>(id)];
  }
  return v;
}

LinearPolynomial::LinearPolynomial(const Polynomial& p) : space_(p.space()) {
  for (const auto& [e, c] : p.terms()) terms_.emplace(e, AffineExpr(c));
}

LinearPolynomial LinearPolynomial::from_variables(
    const VariableSpace& space, std::span<const Exponent> monomials,
    std::span<const int> ids) {
  if (monomials.size() != ids.size()) {
    throw std::invalid_argument("monomial and id lists differ in length");
  }
  LinearPolynomial p(space);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    p.add_term(monomials[k], AffineExpr::variable(ids[k]));
  }
  return p;
}

int LinearPolynomial::degree() const {
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

int LinearPolynomial::degree_in(int var) const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max<int>(d, e[var]);
  return d;
}

void LinearPolynomial::check_space(const VariableSpace& s) const {
  if (!(space_ == s)) {
    throw std::invalid_argument("polynomial variable spaces differ");
  }
}

void LinearPolynomial::add_term(const Exponent& e, const AffineExpr& c,
                                double scale) {
  if (scale == 0.0 || c.is_zero()) return;
  auto it = terms_.find(e);
  if (it == terms_.end()) {
    AffineExpr v;
    v.add_scaled(c, scale);
    if (!v.is_zero()) terms_.emplace(e, std::move(v));
    return;
  }
  it->second.add_scaled(c, scale);
  if (it->second.is_zero()) terms_.erase(it);
}

LinearPolynomial& LinearPolynomial::operator+=(const LinearPolynomial& o) {
  check_space(o.space_);
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

LinearPolynomial& LinearPolynomial::operator-=(const LinearPolynomial& o) {
  check_space(o.space_);
  for (const auto& [e, c] : o.terms_) add_term(e, c, -1.0);
  return *this;
}

LinearPolynomial& LinearPolynomial::operator+=(const Polynomial& o) {
  check_space(o.space());
  for (const auto& [e, c] : o.terms()) add_term(e, AffineExpr(c));
  return *this;
}

LinearPolynomial& LinearPolynomial::operator-=(const Polynomial& o) {
  check_space(o.space());
  for (const auto& [e, c] : o.terms()) add_term(e, AffineExpr(-c));
  return *this;
}

LinearPolynomial& LinearPolynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (it->second.is_zero()) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

LinearPolynomial& LinearPolynomial::add_constant(const AffineExpr& c,
                                                 double scale) {
  add_term(Exponent{}, c, scale);
  return *this;
}

LinearPolynomial operator*(const LinearPolynomial& a, const Polynomial& b) {
  a.check_space(b.space());
  LinearPolynomial r(a.space_);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms()) r.add_term(ea + eb, ca, cb);
  }
  return r;
}

Polynomial LinearPolynomial::evaluate(
    const std::function<double(int)>& value_of) const {
  Polynomial p(space_);
  for (const auto& [e, c] : terms_) p.add_term(e, c.evaluate(value_of));
  return p;
}

Polynomial LinearPolynomial::evaluate(std::span<const double> values) const {
  Polynomial p(space_);
  for (const auto& [e, c] : terms_) p.add_term(e, c.evaluate(values));
  return p;
}

LinearPolynomial differentiate(const LinearPolynomial& p, int var) {
  if (var < 0 || var >= p.space().size()) {
    throw std::out_of_range("unknown variable id " + std::to_string(var));
  }
  LinearPolynomial r(p.space());
  for (const auto& [e, c] : p.terms()) {
    if (e[var] == 0) continue;
    Exponent de = e;
    de[var] = static_cast<std::uint8_t>(e[var] - 1);
    r.add_term(de, c, static_cast<double>(e[var]));
  }
  return r;
}

LinearPolynomial substitute(const LinearPolynomial& p,
                            std::span<const Binding> bindings) {
  for (const auto& b : bindings) {
    if (b.var < 0 || b.var >= p.space().size()) {
      throw std::out_of_range("unknown variable id " + std::to_string(b.var));
    }
  }
  LinearPolynomial r(p.space());
  for (const auto& [e, c] : p.terms()) {
    Exponent re = e;
    double scale = 1.0;
    for (const auto& b : bindings) {
      scale *= ipow(b.value, e[b.var]);
      re[b.var] = 0;
    }
    r.add_term(re, c, scale);
  }
  return r;
}

LinearPolynomial embed(const LinearPolynomial& p, const VariableSpace& target) {
  if (p.space() == target) return p;
  LinearPolynomial r(target);
  const int nv = p.space().size();
  for (const auto& [e, c] : p.terms()) {
    Exponent re;
    for (int i = 0; i < nv; ++i) {
      if (e[i] == 0) continue;
      const int j = p.space().translate(i, target);
      if (j < 0) {
        throw std::invalid_argument("cannot embed: target space lacks " +
                                    p.space().name(i));
      }
      re[j] = e[i];
    }
    r.add_term(re, c);
  }
  return r;
}

LinearPolynomial lie_derivative(const LinearPolynomial& v,
                                std::span<const Polynomial> f) {
  const VariableSpace& s = v.space();
  if (static_cast<int>(f.size()) != s.n_states()) {
    throw std::invalid_argument("dynamics has " + std::to_string(f.size()) +
                                " components, expected " +
                                std::to_string(s.n_states()));
  }
  for (int l = 0; l < s.n_inputs(); ++l) {
    if (v.depends_on(s.w(l))) {
      throw std::invalid_argument("auxiliary function depends on an input");
    }
  }
  LinearPolynomial r(s);
  if (s.has_time()) r += differentiate(v, s.t());
  for (int i = 0; i < s.n_states(); ++i) {
    if (f[static_cast<std::size_t>(i)].is_zero()) continue;
    r += differentiate(v, s.x(i)) * f[static_cast<std::size_t>(i)];
  }
  return r;
}

}  // namespace crashcert
