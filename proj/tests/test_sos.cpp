#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crashcert/conic/schur.hpp"
#include "crashcert/sos/program_builder.hpp"

namespace crashcert {
namespace {

using Pt = std::vector<double>;

LinearPolynomial lin(const Polynomial& p) { return LinearPolynomial(p); }

Polynomial var(const VariableSpace& s, int v) { return Polynomial::variable(s, v); }
Polynomial cst(const VariableSpace& s, double c) { return Polynomial::constant(s, c); }

double max_abs_coefficient(const Polynomial& p) {
  double m = 0.0;
  for (const auto& [e, c] : p.terms()) m = std::max(m, std::abs(c));
  return m;
}

TEST(GramBasisSize, Binomials) {
  EXPECT_EQ(gram_basis_size(2, 2), 6u);
  EXPECT_EQ(gram_basis_size(5, 5), 252u);
  EXPECT_EQ(gram_basis_size(4, 5), 126u);
  EXPECT_EQ(gram_basis_size(3, 0), 1u);
  EXPECT_THROW(gram_basis_size(0, 2), std::invalid_argument);
  EXPECT_THROW(gram_basis_size(2, -1), std::invalid_argument);
  EXPECT_THROW(gram_basis_size(200, 100), std::overflow_error);
}

TEST(Wsos, OneMinusSquareOnInterval) {
  const VariableSpace s(1);
  const Pt lo{-1.0}, hi{1.0};
  const auto K = box_set(lo, hi);
  ProgramBuilder b;
  const auto p = cst(s, 1.0) - var(s, 0) * var(s, 0);
  const auto h = b.constrain_wsos(lin(p), K, 1, "p");
  const auto sol = b.solve();
  ASSERT_TRUE(is_solved(sol.status));
  EXPECT_LT(max_abs_coefficient(p - sol.extract(h.poly)), 1e-8);
}

TEST(Wsos, LinearOnHalfLine) {
  const VariableSpace s(1);
  BasicSemialgebraicSet K(s, block_bit(Block::state));
  K.add_inequality(var(s, 0));
  ProgramBuilder b;
  const auto h = b.constrain_wsos(lin(var(s, 0)), K, 1, "p");
  const auto sol = b.solve();
  ASSERT_TRUE(is_solved(sol.status));
  EXPECT_LT(max_abs_coefficient(var(s, 0) - sol.extract(h.poly)), 1e-8);
}

TEST(Wsos, NegativeConstantInfeasible) {
  const VariableSpace s(2);
  const auto K = ball_set(Pt{0.0, 0.0}, 1.0);
  for (int d : {1, 2, 3}) {
    ProgramBuilder b;
    b.constrain_wsos(lin(cst(s, -1.0)), K, d, "p");
    EXPECT_EQ(b.solve().status, SolveStatus::infeasible) << d;
  }
}

TEST(Wsos, DegreeTooLowThrows) {
  const VariableSpace s(1);
  ProgramBuilder b;
  const auto x = var(s, 0);
  EXPECT_THROW(b.constrain_wsos(lin(x * x * x), box_set(Pt{-1.0}, Pt{1.0}), 1, "p"),
               std::invalid_argument);
}

TEST(Wsos, SquareLowerBound) {
  // max g s.t. x^2 - g is SOS on the real line: g* = 0.
  const VariableSpace s(1);
  ProgramBuilder b;
  const int g = b.add_free();
  auto p = lin(var(s, 0) * var(s, 0));
  p.add_constant(AffineExpr::variable(g), -1.0);
  b.constrain_wsos(p, BasicSemialgebraicSet(s, block_bit(Block::state)), 1, "p");
  b.set_objective(AffineExpr::variable(g), Sense::maximize);
  const auto sol = b.solve();
  ASSERT_TRUE(is_solved(sol.status));
  EXPECT_NEAR(*sol.objective, 0.0, 1e-7);
}

TEST(Wsos, EigenvalueBound) {
  // min l s.t. l (x^2 + y^2) - 2xy is SOS: l* = 1, the largest eigenvalue
  // of [[0,1],[1,0]].
  const VariableSpace s(2);
  ProgramBuilder b;
  const int l = b.add_free();
  const auto x = var(s, 0), y = var(s, 1);
  LinearPolynomial p(s);
  for (const auto& sq : {x * x, y * y}) {
    for (const auto& [e, c] : sq.terms()) p.add_term(e, AffineExpr::variable(l), c);
  }
  p -= 2.0 * x * y;
  b.constrain_wsos(p, BasicSemialgebraicSet(s, block_bit(Block::state)), 1, "p");
  b.set_objective(AffineExpr::variable(l), Sense::minimize);
  const auto sol = b.solve();
  ASSERT_TRUE(is_solved(sol.status));
  EXPECT_NEAR(*sol.objective, 1.0, 1e-7);
}

TEST(Builder, UnconstrainedFreeObjectiveUnbounded) {
  ProgramBuilder b;
  const int g = b.add_free();
  b.set_objective(AffineExpr::variable(g), Sense::maximize);
  AssemblyInfo info;
  EXPECT_EQ(b.solve({}, &info).status, SolveStatus::unbounded);
}

TEST(Builder, DanglingVariableWarns) {
  ProgramBuilder b;
  b.add_free();
  const int g = b.add_nonneg();
  b.set_objective(AffineExpr::variable(g), Sense::minimize);
  AssemblyInfo info;
  b.assemble(&info);
  ASSERT_EQ(info.warnings.size(), 1u);
  EXPECT_EQ(info.num_free, 1);
}

TEST(Builder, ExtractRequiresSolution) {
  SosSolution sol;
  EXPECT_THROW(sol.extract(AffineExpr(1.0)), std::logic_error);
  sol.status = SolveStatus::optimal;
  sol.values = {2.0};
  EXPECT_EQ(sol.extract(AffineExpr(1.5)), 1.5);
  EXPECT_EQ(sol.extract(AffineExpr::variable(0, 3.0)), 6.0);
}

ProgramBuilder lower_bound_program(const Polynomial& p, const BasicSemialgebraicSet& K, int d,
                                   int& gamma, WsosHandle& h) {
  ProgramBuilder b;
  gamma = b.add_free();
  auto q = lin(p);
  q.add_constant(AffineExpr::variable(gamma), -1.0);
  h = b.constrain_wsos(q, K, d, "p - gamma");
  b.set_objective(AffineExpr::variable(gamma), Sense::maximize);
  return b;
}

TEST(Builder, JsonDumpRoundTripAndDeterminism) {
  const VariableSpace s(2);
  const auto x = var(s, 0), y = var(s, 1);
  const auto p = x * x * y + y * y - x;
  int g1 = 0, g2 = 0;
  WsosHandle h1, h2;
  const auto K = ball_set(Pt{0.0, 0.0}, 2.0);
  const auto a = lower_bound_program(p, K, 2, g1, h1).assemble();
  const auto b = lower_bound_program(p, K, 2, g2, h2).assemble();
  const auto ja = to_json(a).dump();
  EXPECT_EQ(ja, to_json(b).dump());
  const auto back = conic_program_from_json(nlohmann::json::parse(ja));
  EXPECT_EQ(to_json(back).dump(), ja);
}

TEST(Builder, DegreeBookkeeping) {
  const VariableSpace s(2);
  const auto x = var(s, 0), y = var(s, 1);
  auto K = intersect(ball_set(Pt{0.0, 0.0}, 2.0), halfspace(Pt{1.0, 0.0}, 0.5));
  for (int d = 1; d <= 3; ++d) {
    int g = 0;
    WsosHandle h;
    const auto b = lower_bound_program(x * y, K, d, g, h);
    const auto& sh = b.shape_of(h);
    ASSERT_EQ(sh.blocks.size(), 3u);
    for (const auto& blk : sh.blocks) {
      int bd = 0;
      for (const auto& e : blk.basis) bd = std::max(bd, e.degree());
      EXPECT_LE(blk.weight.degree() + 2 * bd, 2 * d);
      EXPECT_EQ(blk.basis.size(), gram_basis_size(2, bd));
    }
    // sigma_i basis degree floor((2d - deg g) / 2).
    EXPECT_EQ(sh.blocks[1].basis.size(), gram_basis_size(2, d - 1));
    EXPECT_EQ(sh.blocks[2].basis.size(), gram_basis_size(2, (2 * d - 1) / 2));
  }
}

// Soundness: a solved certificate is nonnegative on K, so gamma never
// exceeds the sampled minimum and p - gamma >= -1e-6 on samples of K.
TEST(Builder, CertificateSoundnessSampling) {
  const VariableSpace s(2);
  const auto x = var(s, 0), y = var(s, 1);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const std::vector<Polynomial> polys = {
      x * x * x - y + x * y * y, pow(x, 4) - 2.0 * x * x * y + 0.3 * y,
      (x - 0.5 * y) * (x + y) * (cst(s, 1.0) - x)};
  const auto K = intersect(ball_set(Pt{0.0, 0.0}, 2.0), halfspace(Pt{-1.0, 1.0}, 1.0));
  for (const auto& p : polys) {
    int g = 0;
    WsosHandle h;
    const auto sol = lower_bound_program(p, K, 2, g, h).solve();
    ASSERT_TRUE(is_solved(sol.status));
    const double gamma = sol.value(g);
    const auto cert = sol.extract(h.poly);
    int accepted = 0;
    double sampled_min = 1e300;
    while (accepted < 1000) {
      const Pt pt{u(rng), u(rng)};
      if (!K.contains(pt)) continue;
      ++accepted;
      EXPECT_GE(cert.evaluate(pt), -1e-6);
      EXPECT_GE(p.evaluate(pt) - gamma, -1e-6);
      sampled_min = std::min(sampled_min, p.evaluate(pt));
    }
    EXPECT_LE(gamma, sampled_min + 1e-6);
    // Residual between the constrained polynomial and its certificate.
    EXPECT_LT(max_abs_coefficient(p - cst(s, gamma) - cert), 1e-6);
  }
}

TEST(Builder, HierarchyIsMonotone) {
  const VariableSpace s(2);
  const auto x = var(s, 0), y = var(s, 1);
  const auto p = x * x * x * y - x * y + 0.5 * y * y * y;
  const auto K = box_set(Pt{-1.0, -1.0}, Pt{1.0, 1.0});
  double prev = -1e300;
  for (int d = 2; d <= 4; ++d) {
    int g = 0;
    WsosHandle h;
    const auto sol = lower_bound_program(p, K, d, g, h).solve();
    ASSERT_TRUE(is_solved(sol.status));
    EXPECT_GE(*sol.objective, prev - 1e-6);
    prev = *sol.objective;
  }
}

TEST(Builder, EqualityConstraintsUseFreeMultipliers) {
  // min of x + y on the circle x^2 + y^2 = 1 is -sqrt(2).
  const VariableSpace s(2);
  const auto x = var(s, 0), y = var(s, 1);
  BasicSemialgebraicSet K(s, block_bit(Block::state));
  K.add_equality(x * x + y * y - cst(s, 1.0));
  int g = 0;
  WsosHandle h;
  const auto sol = lower_bound_program(x + y, K, 1, g, h).solve();
  ASSERT_TRUE(is_solved(sol.status));
  EXPECT_NEAR(*sol.objective, -std::sqrt(2.0), 1e-6);
}

// Multipliers zeta_r over K entering through shifted, scaled layers, the
// pattern of robust Lie constraints.
ProgramBuilder layered_program(std::mt19937& rng, int r_count) {
  const VariableSpace s(1, 0, false, true);
  const auto x = var(s, s.x(0)), z = var(s, s.z());
  const auto K = product(box_set(Pt{-1.0}, Pt{1.0}), peak_interval(s, 1.0));
  std::uniform_real_distribution<double> uh(0.2, 0.8), ua(-1.0, 1.0);
  ProgramBuilder b;
  const int g = b.add_free();
  auto q = lin(cst(s, 2.0) + pow(x, 4) + z);
  q.add_constant(AffineExpr::variable(g), -1.0);
  LinearPolynomial balance(s);
  for (int r = 0; r < r_count; ++r) {
    const double h = uh(rng), a = ua(rng);
    const auto zp = b.wsos_polynomial(K, 1);
    const auto zm = b.wsos_polynomial(K, 1);
    q -= zp.poly * (z - cst(s, h));
    q -= zm.poly * (z + cst(s, h));
    balance += a * (zp.poly - zm.poly);
  }
  b.constrain_wsos(q, K, 2, "lie");
  b.constrain_zero(balance, "balance");
  b.set_objective(AffineExpr::variable(g), Sense::maximize);
  return b;
}

TEST(Builder, LayerDetectionFeedsStructuredSchur) {
  std::mt19937 rng(4);
  const auto b = layered_program(rng, 5);
  AssemblyInfo info;
  const auto prog = b.assemble(&info);
  EXPECT_EQ(info.structured_templates, 2);
  EXPECT_EQ(info.unstructured_templates, 0);
  ASSERT_TRUE(prog.structure);
  std::vector<int> rows(static_cast<std::size_t>(prog.num_rows));
  for (int i = 0; i < prog.num_rows; ++i) rows[i] = i;
  SchurAssembler sa(prog, rows, prog.num_rows);
  EXPECT_EQ(sa.num_structured(), sa.num_psd());
  SchurWeights w;
  std::normal_distribution<double> g;
  for (int k = 0; k < sa.num_psd(); ++k) {
    const int n = sa.psd_order(k);
    for (int rep = 0; rep < 2; ++rep) {
      Eigen::MatrixXd B(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = g(rng);
      Eigen::MatrixXd P = B * B.transpose() + Eigen::MatrixXd::Identity(n, n);
      (rep == 0 ? w.X : w.Sinv).push_back(P);
    }
  }
  w.lin = Eigen::VectorXd::Ones(sa.num_lin());
  Eigen::MatrixXd Mr, Ms;
  sa.assemble(w, SchurKernel::reference, Mr);
  sa.assemble(w, SchurKernel::structured, Ms);
  EXPECT_LE((Mr - Ms).cwiseAbs().maxCoeff(), 1e-11 * Mr.cwiseAbs().maxCoeff());
}

TEST(Builder, KernelsAgreeOnLayeredProgram) {
  std::mt19937 rng(8);
  const auto b = layered_program(rng, 3);
  SolverSettings ref;
  ref.kernel = SchurKernel::reference;
  const auto a = b.solve(ref), s = b.solve();
  ASSERT_TRUE(is_solved(a.status));
  ASSERT_TRUE(is_solved(s.status));
  EXPECT_NEAR(*a.objective, *s.objective, 1e-6);
  // gamma is bounded by the value of 2 + x^4 + z at z = 1, x = 0 minus
  // the nonnegative multiplier terms.
  EXPECT_LE(*s.objective, 3.0 + 1e-6);
}

TEST(Builder, ShiftedUseFallsBackToGenericKernel) {
  // A multiplier that is differentiated no longer matches its template
  // by a monomial shift; the assembler must drop the structure hint.
  const VariableSpace s(1);
  const auto K = box_set(Pt{-1.0}, Pt{1.0});
  ProgramBuilder b;
  const auto zeta = b.wsos_polynomial(K, 1);
  LinearPolynomial p = differentiate(zeta.poly, 0);
  p -= Polynomial::constant(s, 1.0);
  b.constrain_zero(p, "dz = 1");
  AssemblyInfo info;
  const auto prog = b.assemble(&info);
  EXPECT_EQ(info.structured_templates, 0);
  EXPECT_EQ(info.unstructured_templates, 1);
  EXPECT_FALSE(prog.structure);
  EXPECT_TRUE(is_solved(b.solve().status));
}

}  // namespace
}  // namespace crashcert
