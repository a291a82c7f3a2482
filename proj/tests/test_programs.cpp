#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crashcert/programs/crash_programs.hpp"
#include "crashcert/programs/subvalue.hpp"

namespace crashcert {
namespace {

using Pt = std::vector<double>;

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// ---------------------------------------------------------------- moments

TEST(BoxMoments, UnitIntervalTextbook) {
  const auto m = uniform_box_moments(Eigen::VectorXd::Constant(1, -1.0),
                                     Eigen::VectorXd::Constant(1, 1.0), 4);
  EXPECT_DOUBLE_EQ(m.moment(Exponent{}), 1.0);
  Exponent e;
  e[0] = 1;
  EXPECT_DOUBLE_EQ(m.moment(e), 0.0);
  e[0] = 2;
  EXPECT_NEAR(m.moment(e), 1.0 / 3.0, 1e-15);
  e[0] = 4;
  EXPECT_NEAR(m.moment(e), 1.0 / 5.0, 1e-15);
}

TEST(BoxMoments, ProductMomentMatchesMonteCarlo) {
  const auto m = uniform_box_moments(Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2), 4);
  Exponent e;
  e[0] = 2;
  e[1] = 2;
  EXPECT_NEAR(m.moment(e), 16.0 / 9.0, 1e-12);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double s = 0.0;
  const int N = 1000000;
  for (int k = 0; k < N; ++k) {
    const double a = u(rng), b = u(rng);
    s += a * a * b * b;
  }
  EXPECT_NEAR(s / N, m.moment(e), 0.01 * m.moment(e));
  EXPECT_DOUBLE_EQ(m.volume, 16.0);
}

double ball_mc_x1sq(double r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-r, r);
  double s = 0.0;
  int n = 0;
  while (n < 1000000) {
    const double a = u(rng), b = u(rng);
    if (a * a + b * b > r * r) continue;
    s += a * a;
    ++n;
  }
  return s / n;
}

TEST(BallMoments, UnitDiskSecondMoment) {
  const auto m = uniform_ball_moments(Eigen::Vector2d::Zero(), 1.0, 4);
  Exponent e;
  e[0] = 2;
  EXPECT_NEAR(m.moment(e), 0.25, 1e-12);
  EXPECT_NEAR(ball_mc_x1sq(1.0, 3), 0.25, 0.0025);
  EXPECT_NEAR(m.volume, M_PI, 1e-12);
}

TEST(BallMoments, RadiusSqrt8ScalesByRadiusSquared) {
  const auto m = uniform_ball_moments(Eigen::Vector2d::Zero(), std::sqrt(8.0), 4);
  Exponent e;
  e[0] = 2;
  EXPECT_NEAR(m.moment(e), 2.0, 1e-12);
  EXPECT_NEAR(ball_mc_x1sq(std::sqrt(8.0), 5), 2.0, 0.02);
}

TEST(BallMoments, OddMomentsOfCenteredBallVanish) {
  const auto m = uniform_ball_moments(Eigen::Vector3d::Zero(), 1.3, 5);
  for (const auto& [e, v] : m.values) {
    if (e[0] % 2 || e[1] % 2 || e[2] % 2) EXPECT_EQ(v, 0.0);
  }
  EXPECT_DOUBLE_EQ(m.moment(Exponent{}), 1.0);
}

TEST(BallMoments, ShiftedBallMatchesMonteCarlo) {
  const Eigen::Vector2d c(0.5, -1.0);
  const auto m = uniform_ball_moments(c, 0.8, 4);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  double s = 0.0;
  int n = 0;
  while (n < 1000000) {
    const double a = u(rng), b = u(rng);
    if (a * a + b * b > 0.64) continue;
    const double x = c(0) + a, y = c(1) + b;
    s += x * x * y;
    ++n;
  }
  Exponent e;
  e[0] = 2;
  e[1] = 1;
  EXPECT_NEAR(s / n, m.moment(e), 0.01 * std::abs(m.moment(e)));
}

TEST(Moments, IntegrateRejectsNonStateVariables) {
  const auto m = uniform_box_moments(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 2);
  const VariableSpace s(2, 0, true, false);
  EXPECT_THROW(m.integrate(Polynomial::variable(s, s.t())), std::invalid_argument);
  EXPECT_NEAR(m.integrate(Polynomial::variable(s, s.x(0)) * Polynomial::variable(s, s.x(0))),
              1.0 / 3.0, 1e-15);
}

// ---------------------------------------------------------------- complexity

TEST(GramComplexity, DominantStandardBlock) {
  const auto g = gram_complexity_standard(2, 1, 5, 5);
  EXPECT_EQ(g.largest(), 252u);
}

TEST(GramComplexity, DominantRobustBlock) {
  const auto g = gram_complexity_robust(2, 80, 5, 5);
  EXPECT_EQ(g.largest(), 126u);
  bool seen = false;
  for (const auto& b : g.blocks) {
    if (b.label == "zeta") {
      EXPECT_EQ(b.size, 70u);
      EXPECT_EQ(b.count, 80);
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
}

TEST(GramComplexity, ClosedFormsAndMonotoneInDegree) {
  std::uint64_t prev_s = 0, prev_r = 0;
  for (int d = 1; d <= 6; ++d) {
    const auto s = gram_complexity_standard(2, 10, d, d + 2);
    const auto r = gram_complexity_robust(2, 80, d, d + 2);
    EXPECT_EQ(s.blocks.at(0).size, static_cast<std::uint64_t>(binom(3 + d, d)));
    EXPECT_EQ(s.blocks.at(1).size, static_cast<std::uint64_t>(binom(4 + d, d)));
    EXPECT_EQ(s.blocks.at(2).size, static_cast<std::uint64_t>(binom(14 + d + 2, d + 2)));
    EXPECT_EQ(r.blocks.at(2).size, static_cast<std::uint64_t>(binom(4 + d + 2, d + 2)));
    EXPECT_GT(s.largest(), prev_s);
    EXPECT_GT(r.largest(), prev_r);
    prev_s = s.largest();
    prev_r = r.largest();
  }
}

TEST(GramComplexity, ProblemLevelUsesLieDegree) {
  const auto pb = preset_problem("halfcircle");
  EXPECT_EQ(lie_degree(pb, 4, LieForm::robust), 5);
  const auto g = gram_complexity(pb, 4, LieForm::robust);
  EXPECT_EQ(g.d_tilde, 5);
  EXPECT_EQ(g.largest(), 126u);
}

// ---------------------------------------------------------------- min corruption

TEST(MinCorruption, ExactFit) {
  const auto r = min_corruption(Eigen::MatrixXd::Constant(1, 1, 1.0),
                                Eigen::VectorXd::Constant(1, -0.5), 1.0);
  ASSERT_TRUE(r.z.has_value());
  EXPECT_NEAR(*r.z, 0.0, 1e-6);
  EXPECT_NEAR(r.w(0), 0.5, 1e-5);
}

TEST(MinCorruption, SplitsResidualsLikeGridSearch) {
  Eigen::MatrixXd G(2, 1);
  G << 1.0, 1.0;
  const Eigen::Vector2d h(-0.3, -0.7);
  const auto r = min_corruption(G, h, 1.0);
  ASSERT_TRUE(r.z.has_value());
  double grid = 1e9;
  for (int k = 0; k <= 100000; ++k) {
    const double w = -2.0 + 4.0 * k / 100000;
    grid = std::min(grid, std::max(std::abs(w - 0.3), std::abs(w - 0.7)));
  }
  EXPECT_NEAR(grid, 0.2, 1e-4);
  EXPECT_NEAR(*r.z, grid, 1e-5);
}

TEST(MinCorruption, ExceedingCapIsInfeasible) {
  Eigen::MatrixXd G(2, 1);
  G << 0.0, 0.0;
  const Eigen::Vector2d h(-2.0, 2.0);
  const auto r = min_corruption(G, h, 1.0);
  EXPECT_FALSE(r.z.has_value());
  EXPECT_FALSE(is_solved(r.status));
}

TEST(MinCorruption, RejectsEmptyRows) {
  EXPECT_THROW(min_corruption(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), 1.0),
               std::invalid_argument);
}

// ---------------------------------------------------------------- problems

TEST(Presets, AllValidateAndRoundTripThroughJson) {
  for (const auto& name : preset_names()) {
    const auto pb = preset_problem(name);
    EXPECT_NO_THROW(pb.validate()) << name;
    const auto back = crash_problem_from_json(to_json(pb));
    EXPECT_EQ(to_json(back).dump(), to_json(pb).dump()) << name;
  }
  EXPECT_THROW(preset_problem("nope"), std::invalid_argument);
}

TEST(ProblemJson, ErrorNamesOffendingPath) {
  auto j = to_json(preset_problem("halfcircle"));
  j["T"] = -1.0;
  try {
    crash_problem_from_json(j);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("T"), std::string::npos);
  }
}

TEST(PolytopeCost, AbsoluteValueRows) {
  const auto c = PolytopeCost::from_gamma_h(Eigen::MatrixXd::Constant(1, 1, 1.0),
                                            Eigen::VectorXd::Zero(1));
  EXPECT_EQ(c.rows(), 2);
  EXPECT_NEAR(c.cost_of(Eigen::VectorXd::Constant(1, -0.4)), 0.4, 1e-15);
  EXPECT_NEAR(c.cost_of(Eigen::VectorXd::Constant(1, 0.25)), 0.25, 1e-15);
}

CrashProblem halfcircle_with_cost(const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  auto pb = preset_problem("halfcircle");
  pb.cost = PolytopeCost::from_gamma_h(G, h);
  return pb;
}

TEST(CrashBound, DegenerateOverlapGivesZero) {
  auto pb = preset_problem("halfcircle");
  const Pt inside{-0.3, -0.75};
  pb.X0 = point_set(inside);
  ASSERT_TRUE(pb.Xu.contains(inside));
  const auto r = crash_bound(pb, 2, LieForm::robust);
  ASSERT_TRUE(r.bound.has_value());
  EXPECT_LE(*r.bound, 1e-6);
}

TEST(CrashBound, DuplicateRowsAreHarmless) {
  const auto one = crash_bound(halfcircle_with_cost(Eigen::MatrixXd::Constant(1, 1, 1.0),
                                                    Eigen::VectorXd::Zero(1)),
                               2, LieForm::robust);
  const auto two = crash_bound(halfcircle_with_cost(Eigen::MatrixXd::Constant(2, 1, 1.0),
                                                    Eigen::VectorXd::Zero(2)),
                               2, LieForm::robust);
  ASSERT_TRUE(one.bound && two.bound);
  EXPECT_NEAR(*one.bound, *two.bound, 1e-6);
}

TEST(CrashBound, RobustNeverExceedsExplicitOmega) {
  const auto pb = preset_problem("halfcircle");
  for (int d = 1; d <= 2; ++d) {
    const auto r = crash_bound(pb, d, LieForm::robust);
    const auto s = crash_bound(pb, d, LieForm::standard);
    ASSERT_TRUE(r.bound && s.bound) << d;
    EXPECT_LE(*r.bound, *s.bound + 1e-4) << d;
  }
}

TEST(CrashBound, HierarchyIsMonotone) {
  const auto pb = preset_problem("halfcircle");
  double prev = -1e9;
  for (int d = 1; d <= 3; ++d) {
    const auto r = crash_bound(pb, d, LieForm::robust);
    ASSERT_TRUE(r.bound.has_value()) << d;
    EXPECT_GE(*r.bound, prev - 1e-5) << d;
    prev = *r.bound;
  }
}

TEST(CrashBound, RejectsDegreeZero) {
  EXPECT_THROW(crash_bound(preset_problem("halfcircle"), 0, LieForm::robust),
               std::invalid_argument);
}

// Samples the certificate conditions of a solved robust program in original
// coordinates: initial, unsafe and Lie constraints.
TEST(CrashBound, CertificateHoldsOnSampledPoints) {
  const auto pb = preset_problem("halfcircle");
  const auto r = crash_bound(pb, 2, LieForm::robust);
  ASSERT_TRUE(r.bound.has_value());
  const Polynomial& v = r.v;
  const VariableSpace& s = v.space();
  ASSERT_TRUE(s.has_time() && s.has_z());
  const Polynomial vt = differentiate(v, s.t());
  const Polynomial vx1 = differentiate(v, s.x(0));
  const Polynomial vx2 = differentiate(v, s.x(1));
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto pt = [&](double t, double a, double b, double z) {
    Pt p(static_cast<std::size_t>(s.size()));
    p[static_cast<std::size_t>(s.t())] = t;
    p[static_cast<std::size_t>(s.x(0))] = a;
    p[static_cast<std::size_t>(s.x(1))] = b;
    p[static_cast<std::size_t>(s.z())] = z;
    return p;
  };
  int unsafe = 0, lie = 0;
  for (int k = 0; k < 1000; ++k) {
    const double z = pb.J_max * U(rng);
    EXPECT_GE(v.evaluate(pt(0.0, 1.0, 0.0, z)), *r.bound - 1e-6);
  }
  while (unsafe < 1000 || lie < 1000) {
    const double t = pb.T * U(rng), z = pb.J_max * U(rng);
    const double a = -2.0 + 4.0 * U(rng), b = -2.0 + 4.0 * U(rng);
    const Pt x{a, b};
    if (unsafe < 1000 && pb.Xu.contains(x)) {
      EXPECT_GE(z - v.evaluate(pt(t, a, b, z)), -1e-5);
      ++unsafe;
    }
    if (lie < 1000) {
      const double w = z * (2.0 * U(rng) - 1.0);
      const Eigen::VectorXd f = pb.dynamics.evaluate(t, Eigen::Vector2d(a, b),
                                                     Eigen::VectorXd::Constant(1, w));
      const auto p = pt(t, a, b, z);
      EXPECT_GE(vt.evaluate(p) + vx1.evaluate(p) * f(0) + vx2.evaluate(p) * f(1), -1e-5);
      ++lie;
    }
  }
}

TEST(CrashBound, ReportJsonCarriesComplexityAndStatus) {
  const auto r = crash_bound(preset_problem("halfcircle"), 1, LieForm::robust);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("degree").get<int>(), 1);
  EXPECT_TRUE(j.contains("gram_complexity"));
  EXPECT_TRUE(j.contains("status"));
  EXPECT_TRUE(j.contains("bound"));
}

// ---------------------------------------------------------------- subvalue

TEST(Subvalue, PointValueBelowSpecificBoundAndCap) {
  const auto pb = preset_problem("halfcircle");
  const auto phi = problem_measure(pb, "box", 4);
  const auto q = subvalue_bound(pb, 2, phi, LieForm::robust);
  const auto g = crash_bound(pb, 2, LieForm::robust);
  ASSERT_TRUE(q.bound && q.q && g.bound);
  const Pt x0{1.0, 0.0};
  EXPECT_LE(q.q->evaluate(x0), *g.bound + 1e-4);
  EXPECT_LE(*q.bound, pb.Q_max + 1e-6);
  EXPECT_NEAR(*q.objective_lebesgue, *q.bound * 16.0, 1e-9 * std::max(1.0, *q.bound));
}

TEST(SubvalueModel, ConstantPolynomialOutsideUnsafeSet) {
  const auto pb = preset_problem("halfcircle");
  SubvalueModel m;
  const VariableSpace s(2);
  m.q.push_back(Polynomial::constant(s, 0.3));
  m.Xu = pb.Xu;
  m.J_max = 1.0;
  m.Q_max = 4.0;
  const Pt out{1.5, 1.5};
  EXPECT_DOUBLE_EQ(m.evaluate(out), 0.3);
}

TEST(SubvalueModel, IndicatorFloorsUnsafePoints) {
  const auto pb = preset_problem("halfcircle");
  SubvalueModel m;
  const VariableSpace s(2);
  m.q.push_back(Polynomial::constant(s, -0.7));
  m.Xu = pb.Xu;
  m.J_max = 1.0;
  m.Q_max = 4.0;
  const Pt in{-0.3, -0.75};
  const Pt out{1.5, 1.5};
  EXPECT_GE(m.evaluate(in), 0.0);
  EXPECT_DOUBLE_EQ(m.evaluate(out), -0.7);
  EXPECT_DOUBLE_EQ(m.clamped(out), 0.0);
  m.q.push_back(Polynomial::constant(s, 3.0));
  EXPECT_DOUBLE_EQ(m.evaluate(out), 3.0);
  EXPECT_DOUBLE_EQ(m.clamped(out), 1.0);
  m.q.clear();
  EXPECT_TRUE(std::isinf(m.evaluate(out)) && m.evaluate(out) < 0);
}

}  // namespace
}  // namespace crashcert
