#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crashcert/semialg/semialgebraic_set.hpp"

namespace crashcert {
namespace {

using Pt = std::vector<double>;

TEST(BoxSet, UnitInterval) {
  const Pt lo{-1.0}, hi{1.0};
  const auto b = box_set(lo, hi);
  ASSERT_EQ(b.inequalities().size(), 1u);
  EXPECT_TRUE(b.contains(Pt{0.0}));
  EXPECT_FALSE(b.contains(Pt{2.0}));
  EXPECT_TRUE(b.archimedean());
}

TEST(BoxSet, MotivatingStateBox) {
  const Pt lo{-0.6, -1.5}, hi{1.75, 1.5};
  const auto b = box_set(lo, hi);
  EXPECT_TRUE(b.contains(Pt{1.0, 0.0}));
  EXPECT_FALSE(b.contains(Pt{2.0, 0.0}));
}

TEST(BoxSet, AgreesWithIntervalTest) {
  const Pt lo{-0.6, -1.5}, hi{1.75, 1.5};
  const auto b = box_set(lo, hi);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 10000; ++k) {
    const Pt p{u(rng), u(rng)};
    const bool inside = p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
    EXPECT_EQ(b.contains(p), inside) << p[0] << "," << p[1];
  }
}

TEST(BoxSet, EmptyBoxThrows) {
  const Pt lo{1.0}, hi{1.0};
  EXPECT_THROW(box_set(lo, hi), std::invalid_argument);
}

TEST(BallSet, DataDrivenStateBall) {
  const Pt c{0.0, 0.0};
  const auto b = ball_set(c, 8.0);
  EXPECT_TRUE(b.contains(Pt{2.0, 2.0}));
  EXPECT_FALSE(b.contains(Pt{3.0, 0.0}));
  EXPECT_EQ(b.declared_radius().value(), 8.0);
  EXPECT_TRUE(ball_set(Pt{0.0}, 1.0).contains(Pt{0.0}));
  EXPECT_THROW(ball_set(c, 0.0), std::invalid_argument);
}

TEST(BallSet, HalfCircleUnsafeSet) {
  const Pt c{1.0, -0.5};
  const Pt a{0.0, 1.0};
  const auto xu = intersect(ball_set(c, 0.25), halfspace(a, -0.5));
  EXPECT_TRUE(xu.contains(Pt{1.0, -0.75}));
  EXPECT_FALSE(xu.contains(Pt{1.0, 0.0}));
  EXPECT_TRUE(xu.archimedean());
}

TEST(Product, ConstraintCountAndConjunction) {
  const VariableSpace s = VariableSpace::full(2, 0);
  const Pt c{1.0, -0.5}, a{0.0, 1.0};
  const auto xu = intersect(ball_set(c, 0.25), halfspace(a, -0.5));
  const auto time = time_interval(s, 5.0);
  const auto z = peak_interval(s, 2.0);
  const auto dom = product(product(time, xu), z);
  EXPECT_EQ(dom.inequalities().size(),
            time.inequalities().size() + xu.inequalities().size() +
                z.inequalities().size());
  EXPECT_EQ(dom.space(), s);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 6.0);
  std::uniform_real_distribution<double> ux(-0.5, 1.6);
  for (int k = 0; k < 1000; ++k) {
    const Pt p{u(rng), ux(rng), ux(rng) - 1.0, u(rng) * 0.5};
    const bool expected = time.contains(p) && z.contains(p) &&
                          xu.contains(Pt{p[1], p[2]});
    EXPECT_EQ(dom.contains(p), expected);
  }
  EXPECT_THROW(product(time, time), std::invalid_argument);
}

TEST(Product, InputPolytopeTimesPeakInterval) {
  // |w| <= z as two rows over (w, z), times the interval 0 <= z <= 1.
  const VariableSpace s(1, 1, false, true);
  const Polynomial w = Polynomial::variable(s, s.w(0));
  const Polynomial z = Polynomial::variable(s, s.z());
  BasicSemialgebraicSet rows(s, block_bit(Block::input));
  rows.add_inequality(z - w);
  rows.add_inequality(z + w);
  const auto omega = product(rows, peak_interval(s, 1.0));
  EXPECT_EQ(omega.inequalities().size(), 3u);
  // Points are ordered (x, z, w).
  EXPECT_TRUE(omega.contains(Pt{0.0, 0.6, 0.5}));
  EXPECT_FALSE(omega.contains(Pt{0.0, 0.6, 0.7}));
  EXPECT_FALSE(omega.contains(Pt{0.0, 1.1, 0.1}));
}

TEST(ArchimedeanAugment, AppendsBall) {
  const Pt lo{-1.0}, hi{1.0};
  const auto a = archimedean_augment(box_set(lo, hi), 1.0);
  ASSERT_EQ(a.inequalities().size(), 2u);
  EXPECT_TRUE(a.augmented());
  const VariableSpace s(1);
  const Polynomial x = Polynomial::variable(s, 0);
  EXPECT_EQ(a.inequalities()[1], Polynomial::constant(s, 1.0) - x * x);
}

TEST(ArchimedeanAugment, PreservesMembershipInsideRadius) {
  const Pt c{0.0, 0.0};
  const auto ball = ball_set(c, 8.0);
  const auto aug = archimedean_augment(ball, 8.0);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-3.5, 3.5);
  for (int k = 0; k < 1000; ++k) {
    const Pt p{u(rng), u(rng)};
    EXPECT_EQ(ball.contains(p), aug.contains(p));
  }
}

TEST(Membership, ToleranceSemantics) {
  const Pt p{0.5};
  const auto pt = point_set(p);
  EXPECT_TRUE(pt.contains(Pt{0.5 + 5e-10}));
  EXPECT_FALSE(pt.contains(Pt{0.5 + 5e-9}));
  const auto fixed = pt.fixed_coordinates();
  ASSERT_EQ(fixed.size(), 1u);
  EXPECT_EQ(fixed[0].var, 0);
  EXPECT_DOUBLE_EQ(fixed[0].value, 0.5);
}

TEST(SetJson, ShorthandsAndExplicitForms) {
  const auto moon = set_from_json(nlohmann::json::parse(R"({
    "ineqs": [
      {"terms":[{"e":[0,0],"c":0.32},{"e":[1,0],"c":0.8},{"e":[0,1],"c":-0.8},
                {"e":[2,0],"c":-1},{"e":[0,2],"c":-1}]}
    ]})"),
                                  2);
  EXPECT_TRUE(moon.archimedean());
  const auto box = set_from_json(
      nlohmann::json::parse(R"({"box":{"lo":[-2,-2],"hi":[2,2]}})"), 2);
  EXPECT_TRUE(box.contains(Pt{1.9, -1.9}));
  const auto both = set_from_json(nlohmann::json::parse(R"({"all_of":[
      {"ball":{"center":[1,-0.5],"radius_sq":0.25}},
      {"halfspace":{"a":[0,1],"b":-0.5}}]})"),
                                  2);
  EXPECT_TRUE(both.contains(Pt{1.0, -0.75}));
  EXPECT_FALSE(both.contains(Pt{1.0, 0.0}));
  EXPECT_THROW(set_from_json(nlohmann::json::parse(R"({"point":[1]})"), 2),
               std::invalid_argument);
  const auto round = set_from_json(to_json(both), 2);
  EXPECT_EQ(round.inequalities(), both.inequalities());
}

}  // namespace
}  // namespace crashcert
