#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crashcert/poly/linear_polynomial.hpp"
#include "crashcert/poly/poly_json.hpp"

namespace crashcert {
namespace {

Polynomial var(const VariableSpace& s, int v) { return Polynomial::variable(s, v); }
Polynomial cst(const VariableSpace& s, double c) { return Polynomial::constant(s, c); }

// Flow field x1' = x2, x2' = -x1 - x2 + x1^3/3 expressed in `s`.
std::vector<Polynomial> flow(const VariableSpace& s) {
  const Polynomial x1 = var(s, s.x(0));
  const Polynomial x2 = var(s, s.x(1));
  return {x2, -1.0 * x1 - x2 + (1.0 / 3.0) * pow(x1, 3)};
}

Polynomial random_poly(const VariableSpace& s, int max_deg, std::mt19937& rng) {
  std::vector<int> vars;
  for (int i = 0; i < s.size(); ++i) vars.push_back(i);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::bernoulli_distribution keep(0.5);
  Polynomial p(s);
  for (const auto& e : monomials_up_to(vars, max_deg)) {
    if (keep(rng)) p.add_term(e, coef(rng));
  }
  return p;
}

// Oracle: evaluate term by term with std::pow, independent of the library's
// evaluation routine.
double direct_eval(const Polynomial& p, const std::vector<double>& pt) {
  double sum = 0.0;
  for (const auto& [e, c] : p.terms()) {
    double term = c;
    for (int i = 0; i < p.space().size(); ++i) term *= std::pow(pt[i], e[i]);
    sum += term;
  }
  return sum;
}

std::vector<double> random_point(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<double> pt(static_cast<std::size_t>(n));
  for (auto& v : pt) v = u(rng);
  return pt;
}

TEST(VariableSpace, OrderingIsTimeStatePeakInput) {
  const VariableSpace s = VariableSpace::full(2, 1);
  EXPECT_EQ(s.size(), 5);
  EXPECT_EQ(s.t(), 0);
  EXPECT_EQ(s.x(0), 1);
  EXPECT_EQ(s.x(1), 2);
  EXPECT_EQ(s.z(), 3);
  EXPECT_EQ(s.w(0), 4);
  EXPECT_THROW(VariableSpace(2).t(), std::out_of_range);
  EXPECT_THROW(VariableSpace(0), std::invalid_argument);
}

TEST(VariableSpace, TranslateMatchesRoles) {
  const VariableSpace a(2, 0, false, true);
  const VariableSpace b = VariableSpace::full(2, 1);
  EXPECT_EQ(a.translate(a.z(), b), b.z());
  EXPECT_EQ(a.translate(a.x(1), b), b.x(1));
  EXPECT_EQ(b.translate(b.t(), a), -1);
}

TEST(PolyEval, QuadraticPlusLinear) {
  const VariableSpace s(2);
  const Polynomial p = pow(var(s, 0), 2) + 2.0 * var(s, 1);
  const std::vector<double> pt{1.0, 3.0};
  EXPECT_EQ(p.evaluate(pt), 7.0);
}

TEST(PolyEval, ZeroPolynomial) {
  const VariableSpace s(3);
  const std::vector<double> pt{0.3, -2.0, 5.0};
  EXPECT_EQ(Polynomial(s).evaluate(pt), 0.0);
}

TEST(PolyEval, FlowCoordinateWithCancellation) {
  const VariableSpace s(2);
  const Polynomial x1 = var(s, 0), x2 = var(s, 1);
  const Polynomial p = x2 - x1 - x2 + (1.0 / 3.0) * pow(x1, 3);
  EXPECT_FALSE(p.depends_on(1));
  const std::vector<double> pt{1.5, 0.0};
  // 1.5^3/3 - 1.5
  EXPECT_NEAR(p.evaluate(pt), 1.5 * 1.5 * 1.5 / 3.0 - 1.5, 1e-15);
  EXPECT_NEAR(p.evaluate(pt), -0.375, 1e-15);
}

TEST(PolyEval, DimensionMismatchThrows) {
  const VariableSpace s(2);
  const std::vector<double> pt{1.0};
  EXPECT_THROW(var(s, 0).evaluate(pt), std::invalid_argument);
}

TEST(PolyDiff, MonomialRule) {
  const VariableSpace s(2, 0, true, false);
  const Polynomial x1 = var(s, s.x(0)), x2 = var(s, s.x(1));
  EXPECT_EQ(differentiate(pow(x1, 2) * x2, s.x(0)), 2.0 * x1 * x2);
  EXPECT_TRUE(differentiate(pow(x1, 2), s.t()).is_zero());
  EXPECT_THROW(differentiate(x1, 7), std::out_of_range);
}

TEST(PolyDiff, MatchesCentralDifferences) {
  std::mt19937 rng(11);
  const VariableSpace s = VariableSpace::full(2, 1);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Polynomial p = random_poly(s, 4, rng);
    const auto pt = random_point(s.size(), rng);
    for (int v = 0; v < s.size(); ++v) {
      auto plus = pt, minus = pt;
      plus[v] += h;
      minus[v] -= h;
      const double fd = (direct_eval(p, plus) - direct_eval(p, minus)) / (2 * h);
      const double exact = differentiate(p, v).evaluate(pt);
      EXPECT_LE(std::abs(fd - exact), 1e-6 * std::max(1.0, std::abs(exact)))
          << "trial " << trial << " var " << v;
    }
  }
}

TEST(PolyDiff, DegreeDropsByOne) {
  const VariableSpace s(2);
  const Polynomial p = pow(var(s, 0), 3) * var(s, 1) + var(s, 1);
  EXPECT_EQ(differentiate(p, 0).degree(), p.degree() - 1);
}

TEST(PolyMul, DifferenceOfSquares) {
  const VariableSpace s(1);
  const Polynomial x = var(s, 0);
  EXPECT_EQ((x + cst(s, 1)) * (x - cst(s, 1)), pow(x, 2) - cst(s, 1));
  EXPECT_TRUE((x * Polynomial(s)).is_zero());
}

TEST(PolyMul, EvaluationHomomorphism) {
  std::mt19937 rng(5);
  const VariableSpace s(3, 0, true, true);
  for (int trial = 0; trial < 50; ++trial) {
    const Polynomial p = random_poly(s, 3, rng);
    const Polynomial q = random_poly(s, 3, rng);
    const auto pt = random_point(s.size(), rng);
    const double lhs = direct_eval(p * q, pt);
    const double rhs = direct_eval(p, pt) * direct_eval(q, pt);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
    // Commutative up to rounding (the summation order differs).
    for (const auto& [e, c] : (p * q - q * p).terms()) EXPECT_NEAR(c, 0.0, 1e-13);
    if (!p.is_zero() && !q.is_zero()) {
      EXPECT_EQ((p * q).degree(), p.degree() + q.degree());
    }
  }
}

TEST(PolyMul, AddScaleSubstituteRespectEvaluation) {
  std::mt19937 rng(6);
  const VariableSpace s(2, 0, true, true);
  for (int trial = 0; trial < 30; ++trial) {
    const Polynomial p = random_poly(s, 3, rng);
    const Polynomial q = random_poly(s, 3, rng);
    auto pt = random_point(s.size(), rng);
    EXPECT_NEAR(direct_eval(p + 2.5 * q, pt),
                direct_eval(p, pt) + 2.5 * direct_eval(q, pt), 1e-12);
    const std::vector<Binding> b{{s.t(), 0.7}};
    auto bound = pt;
    bound[s.t()] = 0.7;
    EXPECT_NEAR(direct_eval(substitute(p, b), pt), direct_eval(p, bound), 1e-12);
    EXPECT_NEAR(affine_substitute(p, s.z(), 2.0, -0.5).evaluate(pt),
                [&] {
                  auto y = pt;
                  y[s.z()] = 2.0 * pt[s.z()] - 0.5;
                  return direct_eval(p, y);
                }(),
                1e-11);
  }
}

TEST(PolyMul, SpaceMismatchThrows) {
  EXPECT_THROW(var(VariableSpace(1), 0) * var(VariableSpace(2), 0),
               std::invalid_argument);
}

TEST(LinearPolynomial, TimesPolynomialStaysAffine) {
  const VariableSpace s(1);
  const Polynomial x = var(s, 0);
  const std::vector<Exponent> mons{Exponent{}, Exponent::unit(0)};
  const std::vector<int> ids{0, 1};
  // (y0 + y1 x) * (x + 1)
  const LinearPolynomial lp =
      LinearPolynomial::from_variables(s, mons, ids) * (x + cst(s, 1));
  const std::vector<double> y{2.0, -3.0};
  EXPECT_EQ(lp.evaluate(y), (cst(s, 2) - 3.0 * x) * (x + cst(s, 1)));
  for (const auto& [e, c] : lp.terms()) EXPECT_EQ(c.constant(), 0.0);
}

TEST(LieDerivative, StateAndTimeCoordinates) {
  const VariableSpace s = VariableSpace::full(2, 0);
  const auto f = flow(s);
  const LinearPolynomial x1(var(s, s.x(0)));
  EXPECT_EQ(lie_derivative(x1, f).evaluate(std::vector<double>{}),
            var(s, s.x(1)));
  const LinearPolynomial t(var(s, s.t()));
  EXPECT_EQ(lie_derivative(t, f).evaluate(std::vector<double>{}), cst(s, 1));
}

TEST(LieDerivative, PerturbedFlowSecondCoordinate) {
  const VariableSpace s = VariableSpace::full(2, 1);
  auto f = flow(s);
  f[1] += var(s, s.w(0));
  const LinearPolynomial x2(var(s, s.x(1)));
  const Polynomial x1 = var(s, s.x(0));
  const Polynomial expected =
      -1.0 * x1 - var(s, s.x(1)) + (1.0 / 3.0) * pow(x1, 3) + var(s, s.w(0));
  EXPECT_EQ(lie_derivative(x2, f).evaluate(std::vector<double>{}), expected);
}

TEST(LieDerivative, DimensionMismatchAndInputDependenceThrow) {
  const VariableSpace s = VariableSpace::full(2, 1);
  const std::vector<Polynomial> f1{var(s, s.x(1))};
  EXPECT_THROW(lie_derivative(LinearPolynomial(var(s, s.x(0))), f1),
               std::invalid_argument);
  EXPECT_THROW(lie_derivative(LinearPolynomial(var(s, s.w(0))), flow(s)),
               std::invalid_argument);
}

TEST(LieDerivative, MatchesFiniteDifferenceAlongFlow) {
  // d/dh v(t + h, x + h f(t,x)) at h = 0 equals the Lie derivative.
  std::mt19937 rng(21);
  const VariableSpace s = VariableSpace::full(2, 0);
  const auto f = flow(s);
  for (int trial = 0; trial < 20; ++trial) {
    const Polynomial v = random_poly(s, 4, rng);
    const Polynomial lv =
        lie_derivative(LinearPolynomial(v), f).evaluate(std::vector<double>{});
    const auto pt = random_point(s.size(), rng);
    const double h = 1e-5;
    auto shifted = [&](double step) {
      auto q = pt;
      q[s.t()] += step;
      for (int i = 0; i < 2; ++i) q[s.x(i)] += step * f[i].evaluate(pt);
      return direct_eval(v, q);
    };
    const double fd = (shifted(h) - shifted(-h)) / (2 * h);
    const double exact = lv.evaluate(pt);
    EXPECT_LE(std::abs(fd - exact), 1e-6 * std::max(1.0, std::abs(exact)));
  }
}

TEST(LieDerivative, LinearInAuxiliaryFunction) {
  std::mt19937 rng(8);
  const VariableSpace s = VariableSpace::full(2, 1);
  auto f = flow(s);
  f[1] += var(s, s.w(0));
  std::vector<int> txz{s.t(), s.x(0), s.x(1), s.z()};
  const auto mons = monomials_up_to(txz, 3);
  std::vector<int> ids1, ids2;
  for (std::size_t k = 0; k < mons.size(); ++k) {
    ids1.push_back(static_cast<int>(k));
    ids2.push_back(static_cast<int>(k + mons.size()));
  }
  const auto v1 = LinearPolynomial::from_variables(s, mons, ids1);
  const auto v2 = LinearPolynomial::from_variables(s, mons, ids2);
  const auto lhs = lie_derivative(2.0 * v1 - 0.5 * v2, f);
  const auto rhs = 2.0 * lie_derivative(v1, f) - 0.5 * lie_derivative(v2, f);
  EXPECT_EQ(lhs, rhs);
  std::vector<double> y(2 * mons.size());
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : y) v = u(rng);
  const auto a = lhs.evaluate(y);
  const auto b = lie_derivative(LinearPolynomial(2.0 * v1.evaluate(y) -
                                                 0.5 * v2.evaluate(y)),
                                f)
                     .evaluate(y);
  for (const auto& [e, c] : (a - b).terms()) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(Substitute, Examples) {
  const VariableSpace s(1, 0, true, true);
  const Polynomial t = var(s, s.t()), x1 = var(s, s.x(0)), z = var(s, s.z());
  const std::vector<Binding> t0{{s.t(), 0.0}};
  EXPECT_EQ(substitute(LinearPolynomial(t * x1 + z), t0).evaluate(std::vector<double>{}),
            z);
  const std::vector<Binding> z1{{s.z(), 1.0}};
  EXPECT_EQ(substitute(LinearPolynomial(pow(x1, 2)), z1).evaluate(std::vector<double>{}),
            pow(x1, 2));
  const std::vector<Binding> t2{{s.t(), 2.0}};
  const auto r = substitute(LinearPolynomial(pow(t + cst(s, 1), 2)), t2)
                     .evaluate(std::vector<double>{});
  EXPECT_EQ(r, cst(s, 9));
  const std::vector<Binding> bad{{9, 0.0}};
  EXPECT_THROW(substitute(LinearPolynomial(t), bad), std::out_of_range);
}

TEST(LinearPolynomial, CoefficientExtractionRoundTrip) {
  std::mt19937 rng(3);
  const VariableSpace s = VariableSpace::full(2, 1);
  std::vector<int> vars{s.t(), s.x(0), s.x(1), s.z()};
  const auto mons = monomials_up_to(vars, 4);
  std::vector<int> ids(mons.size());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = static_cast<int>(3 * k + 1);
  auto lp = LinearPolynomial::from_variables(s, mons, ids) *
            random_poly(s, 2, rng);
  lp.add_constant(AffineExpr(0.25));
  LinearPolynomial rebuilt(s);
  for (const auto& [e, c] : lp.terms()) rebuilt.add_term(e, c);
  EXPECT_EQ(rebuilt, lp);
}

TEST(PolyJson, BitExactRoundTrip) {
  std::mt19937 rng(17);
  const VariableSpace s = VariableSpace::full(2, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Polynomial p = random_poly(s, 4, rng);
    p.add_term(Exponent::unit(s.z(), 2), 1.0 / 3.0);
    const auto j = to_json(p);
    const Polynomial q = polynomial_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(p, q);
    EXPECT_EQ(to_json(q).dump(), j.dump());
  }
  EXPECT_EQ(to_json(s).dump(), R"({"L":1,"n":2,"t":true,"z":true})");
}

TEST(PolyJson, RejectsWrongExponentLength) {
  const auto j = nlohmann::json::parse(
      R"({"vars":{"n":2},"terms":[{"e":[1],"c":1.0}]})");
  EXPECT_THROW(polynomial_from_json(j), std::invalid_argument);
}

}  // namespace
}  // namespace crashcert
