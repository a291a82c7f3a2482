#include "crashcert/programs/moments.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace crashcert {

namespace {

std::vector<int> state_vars(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// E[y^a] for y uniform on the centered ball of the given radius.
double centered_ball_moment(const Exponent& a, int n, double radius) {
  double log_num = std::log(2.0);
  double beta_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (a[i] % 2 != 0) return 0.0;
    const double b = (a[i] + 1) / 2.0;
    log_num += std::lgamma(b);
    beta_sum += b;
  }
  const int deg = a.degree();
  const double log_int = log_num - std::lgamma(beta_sum) - std::log(deg + n);
  const double log_vol =
      0.5 * n * std::log(std::numbers::pi) - std::lgamma(0.5 * n + 1.0);
  return std::exp(log_int - log_vol) * std::pow(radius, deg);
}

}  // namespace

int MomentVector::n() const {
  return static_cast<int>(kind == "ball" ? center.size() : lo.size());
}

double MomentVector::moment(const Exponent& e) const {
  const auto it = values.find(e);
  if (it == values.end()) throw std::out_of_range("moment beyond stored degree");
  return it->second;
}

double MomentVector::integrate(const Polynomial& p) const {
  const VariableSpace& s = p.space();
  double total = 0.0;
  for (const auto& [e, c] : p.terms()) {
    Exponent se;
    for (int v = 0; v < s.size(); ++v) {
      if (e[v] == 0) continue;
      if (s.block_of(v) != Block::state) {
        throw std::invalid_argument("integrand depends on a non-state variable");
      }
      se[s.offset_in_block(v)] = e[v];
    }
    total += c * moment(se);
  }
  return total;
}

MomentVector uniform_box_moments(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi, int max_degree) {
  if (lo.size() != hi.size() || lo.size() == 0 || max_degree < 0) {
    throw std::invalid_argument("box moments: bad arguments");
  }
  const int n = static_cast<int>(lo.size());
  MomentVector m;
  m.kind = "box";
  m.lo = lo;
  m.hi = hi;
  m.max_degree = max_degree;
  m.volume = 1.0;
  for (int i = 0; i < n; ++i) {
    if (!(lo(i) < hi(i))) throw std::invalid_argument("box moments: empty box");
    m.volume *= hi(i) - lo(i);
  }
  const auto vars = state_vars(n);
  for (const auto& e : monomials_up_to(vars, max_degree)) {
    double v = 1.0;
    for (int i = 0; i < n; ++i) {
      const int k = e[i] + 1;
      v *= (std::pow(hi(i), k) - std::pow(lo(i), k)) / (k * (hi(i) - lo(i)));
    }
    m.values[e] = v;
  }
  return m;
}

MomentVector uniform_ball_moments(const Eigen::VectorXd& center, double radius,
                                  int max_degree) {
  if (center.size() == 0 || !(radius > 0.0) || max_degree < 0) {
    throw std::invalid_argument("ball moments: bad arguments");
  }
  const int n = static_cast<int>(center.size());
  MomentVector m;
  m.kind = "ball";
  m.center = center;
  m.radius = radius;
  m.max_degree = max_degree;
  m.volume = std::exp(0.5 * n * std::log(std::numbers::pi) -
                      std::lgamma(0.5 * n + 1.0)) *
             std::pow(radius, n);
  const auto vars = state_vars(n);
  const auto exps = monomials_up_to(vars, max_degree);
  std::map<Exponent, double, GradedOrder> centered;
  for (const auto& e : exps) centered[e] = centered_ball_moment(e, n, radius);
  const VariableSpace s(n);
  for (const auto& e : exps) {
    // E[(c + y)^e] by expanding the shifted monomial.
    Polynomial p = Polynomial::constant(s, 1.0);
    for (int i = 0; i < n; ++i) {
      if (e[i] == 0) continue;
      const Polynomial shifted =
          Polynomial::variable(s, i) + Polynomial::constant(s, center(i));
      p = p * pow(shifted, e[i]);
    }
    double v = 0.0;
    for (const auto& [te, c] : p.terms()) v += c * centered.at(te);
    m.values[e] = v;
  }
  return m;
}

}  // namespace crashcert
