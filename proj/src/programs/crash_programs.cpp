#include "crashcert/programs/crash_programs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "crashcert/poly/poly_json.hpp"

namespace crashcert {

using nlohmann::json;

std::string to_string(LieForm f) {
  return f == LieForm::robust ? "robust" : "standard";
}

LieForm lie_form_from_string(const std::string& s) {
  if (s == "robust") return LieForm::robust;
  if (s == "standard") return LieForm::standard;
  throw std::invalid_argument("unknown Lie form \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Scaling

VariableScaling VariableScaling::identity(const VariableSpace& space) {
  VariableScaling s;
  s.space = space;
  s.scale.assign(static_cast<std::size_t>(space.size()), 1.0);
  s.shift.assign(static_cast<std::size_t>(space.size()), 0.0);
  return s;
}

VariableScaling VariableScaling::for_problem(const CrashProblem& pb,
                                             const VariableSpace& space) {
  VariableScaling s = identity(space);
  if (!pb.scaling) return s;
  auto set = [&](int var, double lo, double hi) {
    s.scale[static_cast<std::size_t>(var)] = 0.5 * (hi - lo);
    s.shift[static_cast<std::size_t>(var)] = 0.5 * (hi + lo);
  };
  if (space.has_time()) set(space.t(), 0.0, pb.T);
  for (int i = 0; i < space.n_states(); ++i) set(space.x(i), pb.x_lo(i), pb.x_hi(i));
  if (space.has_z()) set(space.z(), 0.0, pb.J_max);
  return s;
}

Polynomial VariableScaling::to_scaled(const Polynomial& p) const {
  Polynomial r = embed(p, space);
  for (int v = 0; v < space.size(); ++v) {
    const auto k = static_cast<std::size_t>(v);
    if (scale[k] == 1.0 && shift[k] == 0.0) continue;
    if (r.depends_on(v)) r = affine_substitute(r, v, scale[k], shift[k]);
  }
  return r;
}

Polynomial VariableScaling::to_original(const Polynomial& p) const {
  Polynomial r = embed(p, space);
  for (int v = 0; v < space.size(); ++v) {
    const auto k = static_cast<std::size_t>(v);
    if (scale[k] == 1.0 && shift[k] == 0.0) continue;
    if (r.depends_on(v)) r = affine_substitute(r, v, 1.0 / scale[k], -shift[k] / scale[k]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Degrees and complexity

int lie_degree(const CrashProblem& pb, int d, LieForm form) {
  if (form == LieForm::robust) return d + pb.dynamics.max_term_degree() / 2;
  return d + pb.dynamics.joint_degree() / 2;
}

std::uint64_t GramComplexity::largest() const {
  std::uint64_t m = 0;
  for (const auto& b : blocks) m = std::max(m, b.size);
  return m;
}

GramComplexity gram_complexity_standard(int n, int L, int d, int d_tilde) {
  GramComplexity g;
  g.program = "standard";
  g.d = d;
  g.d_tilde = d_tilde;
  const auto N = [](int a) { return static_cast<std::uint64_t>(a); };
  g.blocks.push_back({"initial", binomial(N(n + 1 + d), N(d)), 1});
  g.blocks.push_back({"unsafe", binomial(N(n + 2 + d), N(d)), 1});
  g.blocks.push_back({"lie", binomial(N(n + L + 2 + d_tilde), N(d_tilde)), 1});
  return g;
}

GramComplexity gram_complexity_robust(int n, int m, int d, int d_tilde) {
  GramComplexity g;
  g.program = "robust";
  g.d = d;
  g.d_tilde = d_tilde;
  const auto N = [](int a) { return static_cast<std::uint64_t>(a); };
  g.blocks.push_back({"initial", binomial(N(n + 1 + d), N(d)), 1});
  g.blocks.push_back({"unsafe", binomial(N(n + 2 + d), N(d)), 1});
  g.blocks.push_back({"lie", binomial(N(n + 2 + d_tilde), N(d_tilde)), 1});
  g.blocks.push_back(
      {"zeta", binomial(N(n + 2 + d_tilde - 1), N(d_tilde - 1)), m});
  return g;
}

GramComplexity gram_complexity(const CrashProblem& pb, int d, LieForm form) {
  const int dt = lie_degree(pb, d, form);
  if (form == LieForm::robust) {
    return gram_complexity_robust(pb.n(), pb.cost.rows(), d, dt);
  }
  return gram_complexity_standard(pb.n(), pb.num_inputs(), d, dt);
}

json to_json(const GramComplexity& g) {
  json blocks = json::array();
  for (const auto& b : g.blocks) {
    blocks.push_back({{"label", b.label}, {"size", b.size}, {"count", b.count}});
  }
  return {{"program", g.program}, {"d", g.d}, {"d_tilde", g.d_tilde},
          {"blocks", std::move(blocks)}, {"largest", g.largest()}};
}

// ---------------------------------------------------------------------------
// Program construction

namespace {

// Maps a set into the build space, rewritten in scaled variables. A set that
// is not recognisably Archimedean gets the ball implied by the variable
// ranges; `range` holds the largest |scaled value| of every variable.
BasicSemialgebraicSet scaled_set(const BasicSemialgebraicSet& s,
                                 const VariableScaling& sc,
                                 const std::vector<double>& range) {
  const BasicSemialgebraicSet e = s.embedded(sc.space);
  BasicSemialgebraicSet r(sc.space, e.blocks());
  for (const auto& g : e.inequalities()) r.add_inequality(sc.to_scaled(g));
  for (const auto& h : e.equalities()) r.add_equality(sc.to_scaled(h));
  if (e.archimedean()) r.set_archimedean(true);
  if (!r.archimedean()) {
    double r_sq = 0.0;
    for (int v : r.variables()) {
      const double b = range[static_cast<std::size_t>(v)];
      r_sq += b * b;
    }
    r = archimedean_augment(r, r_sq);
  }
  return r;
}

struct Context {
  const CrashProblem& pb;
  VariableSpace space;
  VariableScaling sc;
  std::vector<double> range;
  BasicSemialgebraicSet time, X, Xu, Z;
  std::vector<int> txz;  // variables of v
  double time_factor = 1.0;

  Context(const CrashProblem& p, LieForm form)
      : pb(p),
        space(p.n(), form == LieForm::standard ? p.num_inputs() : 0, true, true) {
    pb.validate();
    sc = VariableScaling::for_problem(pb, space);
    range.assign(static_cast<std::size_t>(space.size()), 0.0);
    auto set_range = [&](int var, double lo, double hi) {
      range[static_cast<std::size_t>(var)] =
          std::max(std::abs(sc.scaled_value(var, lo)), std::abs(sc.scaled_value(var, hi)));
    };
    set_range(space.t(), 0.0, pb.T);
    for (int i = 0; i < pb.n(); ++i) set_range(space.x(i), pb.x_lo(i), pb.x_hi(i));
    set_range(space.z(), 0.0, pb.J_max);
    if (space.n_inputs() > 0) {
      const Eigen::VectorXd wb = input_bounds(pb.cost, pb.J_max);
      for (int l = 0; l < space.n_inputs(); ++l) range[static_cast<std::size_t>(space.w(l))] = wb(l);
    }
    time = scaled_set(time_interval(space, pb.T), sc, range);
    X = scaled_set(pb.X, sc, range);
    Xu = scaled_set(pb.Xu, sc, range);
    Z = scaled_set(peak_interval(space, pb.J_max), sc, range);
    txz.push_back(space.t());
    for (int i = 0; i < pb.n(); ++i) txz.push_back(space.x(i));
    txz.push_back(space.z());
    time_factor = sc.scale[static_cast<std::size_t>(space.t())];
  }

  // Component i of a dynamics field, in scaled variables, multiplied by the
  // time scale (the Lie constraint is scaled by dt/dt_scaled > 0).
  std::vector<Polynomial> scaled_field(const std::vector<Polynomial>& f) const {
    std::vector<Polynomial> out;
    for (int i = 0; i < pb.n(); ++i) {
      const double s = sc.scale[static_cast<std::size_t>(space.x(i))];
      out.push_back(sc.to_scaled(f[static_cast<std::size_t>(i)]) * (time_factor / s));
    }
    return out;
  }

  Polynomial z_poly() const { return sc.to_scaled(Polynomial::variable(space, space.z())); }

  // Row j of the cost polytope without the input part: e0_j + e1_j z.
  Polynomial row_offset(int j) const {
    return Polynomial::constant(space, pb.cost.e0(j)) + pb.cost.e1(j) * z_poly();
  }

  // v at t = 0 (and at the initial point, when X0 is a point).
  LinearPolynomial initial_slice(const LinearPolynomial& v, bool at_point) const {
    std::vector<Binding> b{{space.t(), sc.scaled_value(space.t(), 0.0)}};
    if (at_point) {
      const Eigen::VectorXd x0 = *pb.initial_point();
      for (int i = 0; i < pb.n(); ++i) {
        b.push_back({space.x(i), sc.scaled_value(space.x(i), x0(i))});
      }
    }
    return substitute(v, b);
  }
};

void check_degree(const CrashProblem& pb, int d) {
  if (d < 1) throw std::invalid_argument("relaxation degree must be >= 1");
  if (!(pb.J_max > 0.0)) throw std::invalid_argument("J_max must be positive");
}

// z - v >= 0 on [0,T] x Xu x Z, and the Lie constraint.
void add_dynamics_constraints(CrashProgram& prog, const Context& c) {
  ProgramBuilder& b = prog.builder;
  const CrashProblem& pb = c.pb;
  const int d = prog.d;
  const int dt = prog.d_tilde;
  LinearPolynomial unsafe(c.space);
  unsafe += c.z_poly();
  unsafe -= prog.v;
  b.constrain_wsos(unsafe, product(c.time, product(c.Xu, c.Z)), d, "unsafe");

  const auto f0 = c.scaled_field(pb.dynamics.f0);
  if (prog.form == LieForm::standard) {
    std::vector<Polynomial> f = f0;
    for (int l = 0; l < pb.num_inputs(); ++l) {
      const auto fl = c.scaled_field(pb.dynamics.f[static_cast<std::size_t>(l)]);
      const Polynomial w = Polynomial::variable(c.space, c.space.w(l));
      for (int i = 0; i < pb.n(); ++i) {
        f[static_cast<std::size_t>(i)] += w * fl[static_cast<std::size_t>(i)];
      }
    }
    // Omega = {A w + e(z) >= 0, z in [0, J_max]} in scaled z, plus the
    // input ball implied by the polytope.
    BasicSemialgebraicSet omega(c.space, block_bit(Block::input));
    Polynomial ball = Polynomial::constant(c.space, 0.0);
    for (int l = 0; l < pb.num_inputs(); ++l) {
      const Polynomial w = Polynomial::variable(c.space, c.space.w(l));
      const double r = c.range[static_cast<std::size_t>(c.space.w(l))];
      ball += Polynomial::constant(c.space, r * r) - w * w;
    }
    omega.add_inequality(ball);
    for (int j = 0; j < pb.cost.rows(); ++j) {
      Polynomial g = c.row_offset(j);
      for (int l = 0; l < pb.num_inputs(); ++l) {
        g += pb.cost.A(j, l) * Polynomial::variable(c.space, c.space.w(l));
      }
      omega.add_inequality(g);
    }
    const auto K = product(c.time, product(c.X, product(c.Z, omega)));
    b.constrain_wsos(lie_derivative(prog.v, f), K, dt, "lie");
    return;
  }

  const int m = pb.cost.rows();
  if (m == 0) throw std::invalid_argument("robust program needs cost rows");
  const auto K = product(c.time, product(c.X, c.Z));
  LinearPolynomial lie = lie_derivative(prog.v, f0);
  for (int j = 0; j < m; ++j) {
    prog.zeta.push_back(b.wsos_polynomial(K, dt - 1));
    lie -= prog.zeta.back().poly * c.row_offset(j);
  }
  b.constrain_wsos(lie, K, dt, "lie");
  for (int l = 0; l < pb.num_inputs(); ++l) {
    const auto fl = c.scaled_field(pb.dynamics.f[static_cast<std::size_t>(l)]);
    LinearPolynomial bal(c.space);
    for (int i = 0; i < pb.n(); ++i) {
      if (fl[static_cast<std::size_t>(i)].is_zero()) continue;
      bal += differentiate(prog.v, c.space.x(i)) * fl[static_cast<std::size_t>(i)];
    }
    for (int j = 0; j < m; ++j) {
      if (pb.cost.A(j, l) != 0.0) bal -= prog.zeta[static_cast<std::size_t>(j)].poly * pb.cost.A(j, l);
    }
    b.constrain_zero(bal, "balance" + std::to_string(l));
  }
}

CrashProgram build_specific(const CrashProblem& pb, int d, LieForm form) {
  check_degree(pb, d);
  Context c(pb, form);
  CrashProgram prog;
  prog.space = c.space;
  prog.scaling = c.sc;
  prog.form = form;
  prog.d = d;
  prog.d_tilde = lie_degree(pb, d, form);
  ProgramBuilder& b = prog.builder;
  prog.gamma = b.add_free();
  prog.v = b.free_polynomial(c.space, c.txz, 2 * d);
  const bool at_point = pb.initial_point().has_value();
  LinearPolynomial init = c.initial_slice(prog.v, at_point);
  init.add_constant(AffineExpr::variable(prog.gamma), -1.0);
  if (at_point) {
    b.constrain_wsos(init, c.Z, d, "initial");
  } else {
    b.constrain_wsos(init, product(scaled_set(pb.X0, c.sc, c.range), c.Z), d, "initial");
  }
  add_dynamics_constraints(prog, c);
  b.set_objective(AffineExpr::variable(prog.gamma), Sense::maximize);
  return prog;
}

}  // namespace

CrashProgram build_standard_crash(const CrashProblem& pb, int d) {
  return build_specific(pb, d, LieForm::standard);
}

CrashProgram build_robust_crash(const CrashProblem& pb, int d) {
  return build_specific(pb, d, LieForm::robust);
}

CrashProgram build_subvalue(const CrashProblem& pb, int d, const MomentVector& phi,
                            LieForm form) {
  check_degree(pb, d);
  if (phi.max_degree < 2 * d) throw std::invalid_argument("moments shorter than 2d");
  if (phi.n() != pb.n()) throw std::invalid_argument("moment dimension mismatch");
  Context c(pb, form);
  CrashProgram prog;
  prog.space = c.space;
  prog.scaling = c.sc;
  prog.form = form;
  prog.subvalue = true;
  prog.d = d;
  prog.d_tilde = lie_degree(pb, d, form);
  prog.measure_volume = phi.volume;
  ProgramBuilder& b = prog.builder;
  prog.v = b.free_polynomial(c.space, c.txz, 2 * d);
  std::vector<int> xs;
  for (int i = 0; i < pb.n(); ++i) xs.push_back(c.space.x(i));
  prog.q = b.free_polynomial(c.space, xs, 2 * d);

  b.constrain_wsos(c.initial_slice(prog.v, false) - prog.q, product(c.X, c.Z), d,
                   "initial");
  LinearPolynomial cap(c.space);
  cap += Polynomial::constant(c.space, pb.Q_max);
  cap -= prog.q;
  b.constrain_wsos(cap, c.X, d, "cap");
  add_dynamics_constraints(prog, c);

  // Objective: sum over monomials of q of coefficient * E[x_scaled^beta].
  AffineExpr obj;
  for (const auto& [e, coef] : prog.q.terms()) {
    const double mom = phi.integrate(c.sc.to_original(Polynomial::monomial(c.space, e)));
    obj.add_scaled(coef, mom);
  }
  b.set_objective(obj, Sense::maximize);
  return prog;
}

// ---------------------------------------------------------------------------
// Solving and reporting

BoundReport solve_crash_program(const CrashProgram& prog,
                                const SolverSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  BoundReport r;
  r.program = prog.subvalue ? "subvalue-" + to_string(prog.form) : to_string(prog.form);
  r.degree = prog.d;
  r.d_tilde = prog.d_tilde;
  const SosSolution sol = prog.builder.solve(settings, &r.assembly);
  r.status = sol.status;
  r.stats = sol.conic.stats;
  const VariableSpace out(prog.space.n_states(), 0, true, true);
  if (is_solved(sol.status)) {
    r.bound = sol.objective;
    if (sol.status == SolveStatus::near_optimal) {
      r.uncertainty =
          10.0 * std::abs(r.stats.primal_objective - r.stats.dual_objective);
    }
    r.v = embed(prog.scaling.to_original(sol.extract(prog.v)), out);
    for (const auto& z : prog.zeta) {
      r.zeta.push_back(embed(prog.scaling.to_original(sol.extract(z.poly)), out));
    }
    if (prog.subvalue) {
      r.q = embed(prog.scaling.to_original(sol.extract(prog.q)),
                  VariableSpace(prog.space.n_states()));
      r.objective_lebesgue = *r.bound * prog.measure_volume;
    }
  } else {
    r.v = Polynomial(out);
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

BoundReport crash_bound(const CrashProblem& pb, int d, LieForm form,
                        const SolverSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const CrashProgram prog = form == LieForm::robust ? build_robust_crash(pb, d)
                                                    : build_standard_crash(pb, d);
  BoundReport r = solve_crash_program(prog, settings);
  r.complexity = gram_complexity(pb, d, form);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

BoundReport subvalue_bound(const CrashProblem& pb, int d, const MomentVector& phi,
                           LieForm form, const SolverSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const CrashProgram prog = build_subvalue(pb, d, phi, form);
  BoundReport r = solve_crash_program(prog, settings);
  r.complexity = gram_complexity(pb, d, form);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

json to_json(const BoundReport& r) {
  json zeta = json::array();
  for (const auto& z : r.zeta) zeta.push_back(to_json(z));
  json j{{"program", r.program},
         {"degree", r.degree},
         {"d_tilde", r.d_tilde},
         {"status", to_string(r.status)},
         {"bound", r.bound ? json(*r.bound) : json(nullptr)},
         {"uncertainty", r.uncertainty},
         {"near_optimal", r.status == SolveStatus::near_optimal},
         {"v", to_json(r.v)},
         {"zeta", std::move(zeta)},
         {"seconds", r.seconds},
         {"gram_complexity", to_json(r.complexity)},
         {"assembly",
          {{"rows", r.assembly.num_rows},
           {"free", r.assembly.num_free},
           {"nonneg", r.assembly.num_nonneg},
           {"psd_orders", r.assembly.psd_orders},
           {"warnings", r.assembly.warnings}}},
         {"solver",
          {{"iterations", r.stats.iterations},
           {"primal_residual", r.stats.primal_residual},
           {"dual_residual", r.stats.dual_residual},
           {"relative_gap", r.stats.relative_gap},
           {"message", r.stats.message}}}};
  if (r.q) j["q"] = to_json(*r.q);
  if (r.objective_lebesgue) j["objective_lebesgue"] = *r.objective_lebesgue;
  return j;
}

MomentVector problem_measure(const CrashProblem& pb, const std::string& kind,
                             int max_degree) {
  if (kind == "box") return uniform_box_moments(pb.x_lo, pb.x_hi, max_degree);
  if (kind == "ball") {
    const Eigen::VectorXd half = 0.5 * (pb.x_hi - pb.x_lo);
    if ((half.array() - half(0)).abs().maxCoeff() > 1e-12 * std::abs(half(0))) {
      throw std::invalid_argument("ball measure needs a cubic bounding box");
    }
    return uniform_ball_moments(0.5 * (pb.x_hi + pb.x_lo), half(0), max_degree);
  }
  throw std::invalid_argument("unknown measure \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Linear programs over the cost polytope

CorruptionResult min_corruption(const Eigen::MatrixXd& gamma,
                                const Eigen::VectorXd& h, double J_max,
                                const SolverSettings& settings) {
  if (gamma.rows() < 1 || gamma.rows() != h.size()) {
    throw std::invalid_argument("min_corruption: need m >= 1 matching rows");
  }
  if (!(J_max > 0.0)) throw std::invalid_argument("min_corruption: J_max must be positive");
  ProgramBuilder b;
  const int L = static_cast<int>(gamma.cols());
  std::vector<int> w(static_cast<std::size_t>(L));
  for (auto& id : w) id = b.add_free();
  const int z = b.add_nonneg();
  for (Eigen::Index k = 0; k < gamma.rows(); ++k) {
    for (double sign : {1.0, -1.0}) {
      // z - sign * (Gamma_k w + h_k) - s = 0 with s >= 0.
      AffineExpr e = AffineExpr::variable(z);
      e.add_constant(-sign * h(k));
      for (int l = 0; l < L; ++l) {
        e.add_scaled(AffineExpr::variable(w[static_cast<std::size_t>(l)]), -sign * gamma(k, l));
      }
      e.add_scaled(AffineExpr::variable(b.add_nonneg()), -1.0);
      b.constrain_equal(e, "row");
    }
  }
  AffineExpr cap(J_max);
  cap.add_scaled(AffineExpr::variable(z), -1.0);
  cap.add_scaled(AffineExpr::variable(b.add_nonneg()), -1.0);
  b.constrain_equal(cap, "cap");
  b.set_objective(AffineExpr::variable(z), Sense::minimize);
  const SosSolution sol = b.solve(settings);
  CorruptionResult r;
  r.status = sol.status;
  if (is_solved(sol.status)) {
    r.z = std::max(0.0, sol.value(z));
    r.w.resize(L);
    for (int l = 0; l < L; ++l) r.w(l) = sol.value(w[static_cast<std::size_t>(l)]);
  }
  return r;
}

Eigen::VectorXd input_bounds(const PolytopeCost& cost, double J_max) {
  const int L = static_cast<int>(cost.A.cols());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(L);
  for (int l = 0; l < L; ++l) {
    for (double sign : {1.0, -1.0}) {
      ProgramBuilder b;
      std::vector<int> w(static_cast<std::size_t>(L));
      for (auto& id : w) id = b.add_free();
      const int z = b.add_nonneg();
      for (int j = 0; j < cost.rows(); ++j) {
        AffineExpr e(cost.e0(j));
        e.add_scaled(AffineExpr::variable(z), cost.e1(j));
        for (int k = 0; k < L; ++k) {
          e.add_scaled(AffineExpr::variable(w[static_cast<std::size_t>(k)]), cost.A(j, k));
        }
        e.add_scaled(AffineExpr::variable(b.add_nonneg()), -1.0);
        b.constrain_equal(e, "row");
      }
      AffineExpr cap(J_max);
      cap.add_scaled(AffineExpr::variable(z), -1.0);
      cap.add_scaled(AffineExpr::variable(b.add_nonneg()), -1.0);
      b.constrain_equal(cap, "cap");
      b.set_objective(AffineExpr::variable(w[static_cast<std::size_t>(l)], sign),
                      Sense::maximize);
      const SosSolution sol = b.solve();
      if (sol.status == SolveStatus::unbounded) {
        throw std::invalid_argument("input " + std::to_string(l) +
                                    " is unbounded over the cost polytope");
      }
      if (!is_solved(sol.status)) {
        throw std::invalid_argument("cost polytope is empty for z in [0, J_max]");
      }
      out(l) = std::max(out(l), std::abs(*sol.objective));
    }
  }
  return out;
}

}  // namespace crashcert
