#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "crashcert/datadriven/datadriven.hpp"
#include "crashcert/programs/crash_programs.hpp"

namespace crashcert {
namespace {

const VariableSpace kTX1(1, 0, true, false);

Polynomial xpow(int k) {
  Exponent e;
  e[kTX1.x(0)] = k;
  return Polynomial::monomial(kTX1, e);
}

std::vector<DataRecord> flow_records(int count, double eps, std::uint64_t seed) {
  const auto pb = preset_problem("halfcircle");
  return generate_synthetic_data(flow_dynamics().f0, pb.X, pb.x_lo, pb.x_hi, pb.T, count,
                                 eps, {1}, seed);
}

Dictionary flow_dictionary() {
  auto d = monomial_dictionary(2, 3, {1});
  const VariableSpace s(2, 0, true, false);
  d.f0[0] = Polynomial::variable(s, s.x(1));
  return d;
}

TEST(AssembleGammaH, DirectSubstitution) {
  Dictionary d;
  d.f0 = {Polynomial(kTX1)};
  d.f = {{xpow(1)}, {xpow(2)}};
  DataRecord r;
  r.t = 0.0;
  r.x = Eigen::VectorXd::Constant(1, 2.0);
  r.y = Eigen::VectorXd::Constant(1, 5.0);
  const auto m = assemble_gamma_h(d, {r}, {0});
  ASSERT_EQ(m.gamma.rows(), 1);
  EXPECT_DOUBLE_EQ(m.gamma(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.gamma(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(m.h(0), -5.0);
  EXPECT_EQ(m.provenance.at(0), std::make_pair(0, 0));
}

TEST(AssembleGammaH, Errors) {
  const auto d = flow_dictionary();
  const auto data = flow_records(3, 0.1, 1);
  EXPECT_THROW(assemble_gamma_h(d, {}, {1}), std::invalid_argument);
  EXPECT_THROW(assemble_gamma_h(d, data, {}), std::invalid_argument);
  auto bad = data;
  bad[1].x = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(assemble_gamma_h(d, bad, {1}), std::invalid_argument);
}

TEST(AssembleGammaH, FlowShapeFortyRowsTenColumns) {
  const auto m = assemble_gamma_h(flow_dictionary(), flow_records(40, 0.5, 3), {1});
  EXPECT_EQ(m.gamma.rows(), 40);
  EXPECT_EQ(m.gamma.cols(), 10);
  EXPECT_EQ(PolytopeCost::from_gamma_h(m.gamma, m.h).rows(), 80);
}

TEST(AssembleGammaH, ResidualIdentity) {
  const auto d = flow_dictionary();
  const auto data = flow_records(25, 0.3, 9);
  const auto m = assemble_gamma_h(d, data, {1});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd w(d.size());
    for (int l = 0; l < d.size(); ++l) w(l) = N(rng);
    const Eigen::VectorXd lhs = m.gamma * w + m.h;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const std::vector<double> pt{data[k].t, data[k].x(0), data[k].x(1)};
      double f = d.f0[1].evaluate(pt);
      for (int l = 0; l < d.size(); ++l) {
        f += w(l) * d.f[static_cast<std::size_t>(l)][1].evaluate(pt);
      }
      EXPECT_NEAR(lhs(static_cast<Eigen::Index>(k)), f - data[k].y(1), 1e-12);
    }
  }
}

TEST(MonomialDictionary, SizesAndUnitCoefficients) {
  const auto d1 = monomial_dictionary(1, 1, {0});
  EXPECT_EQ(d1.size(), 2);
  const auto d2 = monomial_dictionary(2, 3, {1});
  EXPECT_EQ(d2.size(), 10);
  for (int l = 0; l < d2.size(); ++l) {
    EXPECT_EQ(d2.mask(l), std::vector<int>{1});
    const auto& p = d2.f[static_cast<std::size_t>(l)][1];
    ASSERT_EQ(p.terms().size(), 1u);
    EXPECT_EQ(p.terms().begin()->second, 1.0);
  }
  EXPECT_EQ(monomial_dictionary(2, 2, {0, 1}).size(), 12);
  EXPECT_THROW(monomial_dictionary(2, 0, {0}), std::invalid_argument);
}

TEST(DictionaryJson, RoundTrip) {
  const auto d = flow_dictionary();
  const auto back = dictionary_from_json(to_json(d));
  EXPECT_EQ(to_json(back).dump(), to_json(d).dump());
  auto j = to_json(d);
  j["basis"][0]["mask"] = std::vector<int>{0};
  EXPECT_THROW(dictionary_from_json(j), std::invalid_argument);
}

TEST(SyntheticData, NoiselessRecordsAreExact) {
  const auto data = flow_records(50, 0.0, 2);
  const auto f = flow_dynamics();
  for (const auto& r : data) {
    const Eigen::VectorXd F = f.evaluate(r.t, r.x, Eigen::VectorXd::Zero(1));
    EXPECT_EQ((r.y - F).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(SyntheticData, StatesInsideXAndTimesInHorizon) {
  const auto pb = preset_problem("halfcircle");
  for (const auto& r : flow_records(200, 0.2, 5)) {
    EXPECT_TRUE(pb.X.contains(std::vector<double>{r.x(0), r.x(1)}));
    EXPECT_GE(r.t, 0.0);
    EXPECT_LE(r.t, pb.T);
    const Eigen::VectorXd F = flow_dynamics().evaluate(r.t, r.x, Eigen::VectorXd::Zero(1));
    EXPECT_EQ(r.y(0), F(0));
    EXPECT_LE(std::abs(r.y(1) - F(1)), 0.2);
  }
}

TEST(SyntheticData, SeededCsvIsByteIdentical) {
  std::ostringstream a, b, c;
  write_data_csv(a, flow_records(40, 0.5, 7));
  write_data_csv(b, flow_records(40, 0.5, 7));
  write_data_csv(c, flow_records(40, 0.5, 8));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(SyntheticData, Errors) {
  const auto pb = preset_problem("halfcircle");
  EXPECT_THROW(generate_synthetic_data(flow_dynamics().f0, pb.X, pb.x_lo, pb.x_hi, 5.0, 3,
                                       -0.1, {1}, 0),
               std::invalid_argument);
  const double far[] = {10.0, 10.0};
  const auto empty = ball_set(far, 0.01);
  EXPECT_THROW(generate_synthetic_data(flow_dynamics().f0, empty, pb.x_lo, pb.x_hi, 5.0, 1,
                                       0.1, {1}, 0),
               std::runtime_error);
}

TEST(DataCsv, RoundTripsExactly) {
  const auto data = flow_records(15, 0.5, 12);
  std::ostringstream out;
  write_data_csv(out, data);
  std::istringstream in(out.str());
  const auto back = read_data_csv(in);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    EXPECT_EQ(back[k].t, data[k].t);
    EXPECT_EQ(back[k].x, data[k].x);
    EXPECT_EQ(back[k].y, data[k].y);
  }
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,x1,x2,y1,y2");
}

TEST(DataCsv, MalformedRowsNameTheLine) {
  std::istringstream bad_header("t,x1,y2\n");
  EXPECT_THROW(read_data_csv(bad_header), std::invalid_argument);
  std::istringstream bad_row("t,x1,y1\n0,1,2\n0,abc,2\n");
  try {
    read_data_csv(bad_row);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream short_row("t,x1,y1\n0,1\n");
  EXPECT_THROW(read_data_csv(short_row), std::invalid_argument);
}

TEST(MatrixCsv, RoundTripsExactly) {
  const auto m = assemble_gamma_h(flow_dictionary(), flow_records(12, 0.5, 4), {1});
  std::ostringstream out;
  write_matrix_csv(out, m.gamma);
  std::istringstream in(out.str());
  EXPECT_EQ(read_matrix_csv(in), m.gamma);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(read_matrix_csv(ragged), std::invalid_argument);
}

TEST(MinCorruptionOnData, PerfectDataFitsExactly) {
  const auto m = assemble_gamma_h(flow_dictionary(), flow_records(30, 0.0, 21), {1});
  const auto r = min_corruption(m.gamma, m.h, 1.0);
  ASSERT_TRUE(r.z.has_value());
  EXPECT_LT(*r.z, 1e-6);
}

TEST(MinCorruptionOnData, NoisyFlowInstanceIsPositiveAndBelowNoise) {
  for (std::uint64_t seed : {1u, 7u, 42u}) {
    const auto data = flow_records(40, 0.5, seed);
    const auto m = assemble_gamma_h(flow_dictionary(), data, {1});
    double max_noise = 0.0;
    for (const auto& r : data) {
      const Eigen::VectorXd F = flow_dynamics().evaluate(r.t, r.x, Eigen::VectorXd::Zero(1));
      max_noise = std::max(max_noise, std::abs(r.y(1) - F(1)));
    }
    const auto r = min_corruption(m.gamma, m.h, 1.0);
    ASSERT_TRUE(r.z.has_value()) << seed;
    EXPECT_GT(*r.z, 0.0) << seed;
    EXPECT_LE(*r.z, max_noise + 1e-6) << seed;
    EXPECT_LE(max_noise, 0.5);
  }
}

TEST(FlowDataDriven, ProblemShape) {
  const auto s = flow_data_driven(40, 0.5, 7);
  EXPECT_EQ(s.problem.num_inputs(), 10);
  EXPECT_EQ(s.problem.cost.rows(), 80);
  EXPECT_EQ(s.data.size(), 40u);
  EXPECT_NO_THROW(s.problem.validate());
  const auto g = gram_complexity(s.problem, 4, LieForm::robust);
  EXPECT_EQ(g.d_tilde, 5);
}

}  // namespace
}  // namespace crashcert
