#include "crashcert/semialg/semialgebraic_set.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "crashcert/poly/poly_json.hpp"

namespace crashcert {

using nlohmann::json;

namespace {

constexpr BlockMask kStateBit = block_bit(Block::state);

void check_space(const VariableSpace& a, const VariableSpace& b) {
  if (!(a == b)) throw std::invalid_argument("set variable spaces differ");
}

std::vector<double> as_vector(const json& j, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + ": expected array");
  return j.get<std::vector<double>>();
}

}  // namespace

void BasicSemialgebraicSet::add_inequality(Polynomial g) {
  check_space(space_, g.space());
  if (g.degree() == 2) {
    std::uint32_t diag = 0;
    bool negative_diagonal = true;
    for (const auto& [e, c] : g.terms()) {
      if (e.degree() != 2) continue;
      int k = 0;
      while (e[k] == 0) ++k;
      if (e[k] != 2 || c >= 0.0) {
        negative_diagonal = false;
        break;
      }
      diag |= 1u << k;
    }
    if (negative_diagonal) {
      bounded_vars_ |= diag;
      std::uint32_t needed = 0;
      for (int v : variables()) needed |= 1u << v;
      if ((bounded_vars_ & needed) == needed) archimedean_ = true;
    }
  }
  ineqs_.push_back(std::move(g));
}

void BasicSemialgebraicSet::add_equality(Polynomial h) {
  check_space(space_, h.space());
  eqs_.push_back(std::move(h));
}

std::vector<int> BasicSemialgebraicSet::variables() const {
  std::vector<int> vars;
  for (int v = 0; v < space_.size(); ++v) {
    if (blocks_ & block_bit(space_.block_of(v))) vars.push_back(v);
  }
  return vars;
}

bool BasicSemialgebraicSet::contains(std::span<const double> point,
                                     double tol) const {
  for (const auto& g : ineqs_) {
    if (!(g.evaluate(point) >= -tol)) return false;
  }
  for (const auto& h : eqs_) {
    if (!(std::abs(h.evaluate(point)) <= tol)) return false;
  }
  return true;
}

std::vector<Binding> BasicSemialgebraicSet::fixed_coordinates() const {
  std::vector<Binding> out;
  for (const auto& h : eqs_) {
    if (h.degree() != 1) continue;
    int var = -1;
    double a = 0.0;
    double b = 0.0;
    bool single = true;
    for (const auto& [e, c] : h.terms()) {
      if (e.degree() == 0) {
        b = c;
        continue;
      }
      int k = 0;
      while (e[k] == 0) ++k;
      if (var >= 0 && var != k) single = false;
      var = k;
      a = c;
    }
    if (single && var >= 0 && a != 0.0) out.push_back({var, -b / a});
  }
  return out;
}

BasicSemialgebraicSet BasicSemialgebraicSet::embedded(
    const VariableSpace& target) const {
  BasicSemialgebraicSet r(target, blocks_);
  for (const auto& g : ineqs_) r.add_inequality(embed(g, target));
  for (const auto& h : eqs_) r.add_equality(embed(h, target));
  r.radius_ = radius_;
  r.archimedean_ = r.archimedean_ || archimedean_;
  r.augmented_ = augmented_;
  return r;
}

BasicSemialgebraicSet box_set(std::span<const double> lo,
                              std::span<const double> hi) {
  if (lo.size() != hi.size() || lo.empty()) {
    throw std::invalid_argument("box bounds must be nonempty and equal length");
  }
  const VariableSpace s(static_cast<int>(lo.size()));
  BasicSemialgebraicSet set(s, kStateBit);
  double r_sq = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("empty box");
    const Polynomial x = Polynomial::variable(s, static_cast<int>(i));
    set.add_inequality((x - Polynomial::constant(s, lo[i])) *
                       (Polynomial::constant(s, hi[i]) - x));
    r_sq += std::max(lo[i] * lo[i], hi[i] * hi[i]);
  }
  set.set_declared_radius(r_sq);
  set.set_archimedean(true);
  return set;
}

BasicSemialgebraicSet ball_set(std::span<const double> center,
                               double radius_sq) {
  if (center.empty()) throw std::invalid_argument("ball center is empty");
  if (!(radius_sq > 0.0)) throw std::invalid_argument("nonpositive ball radius");
  const VariableSpace s(static_cast<int>(center.size()));
  Polynomial g = Polynomial::constant(s, radius_sq);
  double c_norm = 0.0;
  for (std::size_t i = 0; i < center.size(); ++i) {
    const Polynomial d = Polynomial::variable(s, static_cast<int>(i)) -
                         Polynomial::constant(s, center[i]);
    g -= d * d;
    c_norm += center[i] * center[i];
  }
  BasicSemialgebraicSet set(s, kStateBit);
  set.add_inequality(std::move(g));
  if (c_norm == 0.0) {
    set.set_declared_radius(radius_sq);
  } else {
    const double r = std::sqrt(c_norm) + std::sqrt(radius_sq);
    set.set_declared_radius(r * r);
  }
  set.set_archimedean(true);
  return set;
}

BasicSemialgebraicSet halfspace(std::span<const double> a, double b) {
  if (a.empty()) throw std::invalid_argument("halfspace normal is empty");
  const VariableSpace s(static_cast<int>(a.size()));
  Polynomial g = Polynomial::constant(s, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    g -= a[i] * Polynomial::variable(s, static_cast<int>(i));
  }
  BasicSemialgebraicSet set(s, kStateBit);
  set.add_inequality(std::move(g));
  return set;
}

BasicSemialgebraicSet point_set(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("point is empty");
  const VariableSpace s(static_cast<int>(p.size()));
  BasicSemialgebraicSet set(s, kStateBit);
  double r_sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    set.add_equality(Polynomial::variable(s, static_cast<int>(i)) -
                     Polynomial::constant(s, p[i]));
    r_sq += p[i] * p[i];
  }
  set.set_declared_radius(r_sq);
  set.set_archimedean(true);
  return set;
}

BasicSemialgebraicSet time_interval(const VariableSpace& space, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("nonpositive horizon");
  const Polynomial t = Polynomial::variable(space, space.t());
  BasicSemialgebraicSet set(space, block_bit(Block::time));
  set.add_inequality(t * (Polynomial::constant(space, horizon) - t));
  set.set_declared_radius(horizon * horizon);
  set.set_archimedean(true);
  return set;
}

BasicSemialgebraicSet peak_interval(const VariableSpace& space, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("nonpositive peak cap");
  const Polynomial z = Polynomial::variable(space, space.z());
  BasicSemialgebraicSet set(space, block_bit(Block::peak));
  set.add_inequality(z * (Polynomial::constant(space, cap) - z));
  set.set_declared_radius(cap * cap);
  set.set_archimedean(true);
  return set;
}

BasicSemialgebraicSet intersect(const BasicSemialgebraicSet& a,
                                const BasicSemialgebraicSet& b) {
  const VariableSpace s = VariableSpace::merge(a.space(), b.space());
  BasicSemialgebraicSet r(s, a.blocks() | b.blocks());
  const auto ea = a.embedded(s);
  const auto eb = b.embedded(s);
  for (const auto& g : ea.inequalities()) r.add_inequality(g);
  for (const auto& g : eb.inequalities()) r.add_inequality(g);
  for (const auto& h : ea.equalities()) r.add_equality(h);
  for (const auto& h : eb.equalities()) r.add_equality(h);
  if (a.declared_radius() && b.declared_radius()) {
    r.set_declared_radius(std::min(*a.declared_radius(), *b.declared_radius()));
  } else if (a.declared_radius()) {
    r.set_declared_radius(*a.declared_radius());
  } else if (b.declared_radius()) {
    r.set_declared_radius(*b.declared_radius());
  }
  // A subset of an Archimedean set over the same blocks stays Archimedean.
  const bool covers_a = (a.blocks() & ~b.blocks()) == 0 || b.blocks() == 0;
  const bool covers_b = (b.blocks() & ~a.blocks()) == 0 || a.blocks() == 0;
  r.set_archimedean(r.archimedean() || (a.archimedean() && covers_b) ||
                    (b.archimedean() && covers_a));
  if (a.augmented() || b.augmented()) r.mark_augmented();
  return r;
}

BasicSemialgebraicSet product(const BasicSemialgebraicSet& a,
                              const BasicSemialgebraicSet& b) {
  if (a.blocks() & b.blocks()) {
    throw std::invalid_argument("product of sets over overlapping blocks");
  }
  BasicSemialgebraicSet r = intersect(a, b);
  if (a.declared_radius() && b.declared_radius()) {
    r.set_declared_radius(*a.declared_radius() + *b.declared_radius());
  } else {
    BasicSemialgebraicSet plain(r.space(), r.blocks());
    for (const auto& g : r.inequalities()) plain.add_inequality(g);
    for (const auto& h : r.equalities()) plain.add_equality(h);
    r = plain;
  }
  r.set_archimedean(r.archimedean() || (a.archimedean() && b.archimedean()));
  if (a.augmented() || b.augmented()) r.mark_augmented();
  return r;
}

BasicSemialgebraicSet archimedean_augment(const BasicSemialgebraicSet& s,
                                          double r_sq) {
  BasicSemialgebraicSet r = s;
  Polynomial g = Polynomial::constant(s.space(), r_sq);
  for (int v : s.variables()) {
    const Polynomial y = Polynomial::variable(s.space(), v);
    g -= y * y;
  }
  r.add_inequality(std::move(g));
  r.set_declared_radius(r_sq);
  r.set_archimedean(true);
  r.mark_augmented();
  return r;
}

BasicSemialgebraicSet set_from_json(const json& j, int n_states) {
  if (!j.is_object()) throw std::invalid_argument("set: expected object");
  const VariableSpace s(n_states);
  auto check_dim = [&](std::size_t k, const char* what) {
    if (static_cast<int>(k) != n_states) {
      throw std::invalid_argument(std::string(what) + ": expected " +
                                  std::to_string(n_states) + " entries");
    }
  };
  if (j.contains("box")) {
    const auto lo = as_vector(j["box"].at("lo"), "box/lo");
    const auto hi = as_vector(j["box"].at("hi"), "box/hi");
    check_dim(lo.size(), "box/lo");
    check_dim(hi.size(), "box/hi");
    return box_set(lo, hi);
  }
  if (j.contains("ball")) {
    const auto c = as_vector(j["ball"].at("center"), "ball/center");
    check_dim(c.size(), "ball/center");
    return ball_set(c, j["ball"].at("radius_sq").get<double>());
  }
  if (j.contains("halfspace")) {
    const auto a = as_vector(j["halfspace"].at("a"), "halfspace/a");
    check_dim(a.size(), "halfspace/a");
    return halfspace(a, j["halfspace"].at("b").get<double>());
  }
  if (j.contains("point")) {
    const auto p = as_vector(j["point"], "point");
    check_dim(p.size(), "point");
    return point_set(p);
  }
  if (j.contains("all_of")) {
    const auto& parts = j["all_of"];
    if (!parts.is_array() || parts.empty()) {
      throw std::invalid_argument("all_of: expected nonempty array");
    }
    BasicSemialgebraicSet r = set_from_json(parts[0], n_states);
    for (std::size_t k = 1; k < parts.size(); ++k) {
      r = intersect(r, set_from_json(parts[k], n_states));
    }
    return r;
  }
  BasicSemialgebraicSet r(s, kStateBit);
  for (const auto& g : j.value("ineqs", json::array())) {
    r.add_inequality(polynomial_from_json(g, s));
  }
  for (const auto& h : j.value("eqs", json::array())) {
    r.add_equality(polynomial_from_json(h, s));
  }
  if (j.contains("radius")) r.set_declared_radius(j["radius"].get<double>());
  return r;
}

json to_json(const BasicSemialgebraicSet& s) {
  json ineqs = json::array();
  json eqs = json::array();
  for (const auto& g : s.inequalities()) ineqs.push_back(to_json(g));
  for (const auto& h : s.equalities()) eqs.push_back(to_json(h));
  json j{{"ineqs", std::move(ineqs)}, {"eqs", std::move(eqs)}};
  if (s.declared_radius()) j["radius"] = *s.declared_radius();
  return j;
}

}  // namespace crashcert
