#include "crashcert/programs/crash_problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crashcert/poly/poly_json.hpp"

namespace crashcert {

using nlohmann::json;

namespace {

VariableSpace dynamics_space(int n) { return VariableSpace(n, 0, true, false); }

Polynomial read_dynamics_poly(const json& j, int n) {
  const VariableSpace s = dynamics_space(n);
  return embed(polynomial_from_json(j, s), s);
}

std::vector<Polynomial> read_field(const json& j, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw std::invalid_argument("expected " + std::to_string(n) +
                                " polynomials");
  }
  std::vector<Polynomial> out;
  for (const auto& p : j) out.push_back(read_dynamics_poly(p, n));
  return out;
}

std::vector<double> as_vector(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected array of numbers");
  std::vector<double> v;
  for (const auto& x : j) v.push_back(x.get<double>());
  return v;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd as_matrix(const json& j, int cols) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected nonempty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = as_vector(j[r]);
    if (static_cast<int>(row.size()) != cols) {
      throw std::invalid_argument("row " + std::to_string(r) + ": expected " +
                                  std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[c];
  }
  return m;
}

// Runs fn, prefixing any parse error with the JSON path it concerns.
template <class F>
auto at_path(const std::string& path, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    if (!msg.empty() && msg[0] == '/') throw;
    throw std::invalid_argument(path + ": " + msg);
  }
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

int Dynamics::max_term_degree() const {
  int d = 0;
  for (const auto& p : f0) d = std::max(d, p.degree());
  for (const auto& fl : f) {
    for (const auto& p : fl) d = std::max(d, p.degree());
  }
  return d;
}

int Dynamics::joint_degree() const {
  int d = 0;
  for (const auto& p : f0) d = std::max(d, p.degree());
  for (const auto& fl : f) {
    for (const auto& p : fl) {
      if (!p.is_zero()) d = std::max(d, p.degree() + 1);
    }
  }
  return d;
}

Eigen::VectorXd Dynamics::evaluate(double t, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& w) const {
  const int nn = n();
  std::vector<double> pt(static_cast<std::size_t>(nn + 1));
  pt[0] = t;
  for (int i = 0; i < nn; ++i) pt[static_cast<std::size_t>(i + 1)] = x(i);
  Eigen::VectorXd r(nn);
  for (int i = 0; i < nn; ++i) {
    double v = f0[static_cast<std::size_t>(i)].evaluate(pt);
    for (int l = 0; l < num_inputs(); ++l) {
      const auto& p = f[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
      if (!p.is_zero() && w(l) != 0.0) v += w(l) * p.evaluate(pt);
    }
    r(i) = v;
  }
  return r;
}

PolytopeCost PolytopeCost::from_gamma_h(const Eigen::MatrixXd& gamma,
                                        const Eigen::VectorXd& h) {
  if (gamma.rows() != h.size() || gamma.rows() == 0) {
    throw std::invalid_argument("Gamma/h: need m >= 1 matching rows");
  }
  const Eigen::Index m = gamma.rows();
  PolytopeCost c;
  c.A.resize(2 * m, gamma.cols());
  c.A << -gamma, gamma;
  c.e0.resize(2 * m);
  c.e0 << -h, h;
  c.e1 = Eigen::VectorXd::Ones(2 * m);
  return c;
}

PolytopeCost PolytopeCost::input_box(const Eigen::VectorXd& lo,
                                     const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw std::invalid_argument("input box: bounds must match");
  }
  const Eigen::Index L = lo.size();
  PolytopeCost c;
  c.A = Eigen::MatrixXd::Zero(2 * L, L);
  c.e0.resize(2 * L);
  c.e1 = Eigen::VectorXd::Zero(2 * L);
  for (Eigen::Index l = 0; l < L; ++l) {
    if (!(lo(l) <= hi(l))) throw std::invalid_argument("input box: empty");
    c.A(2 * l, l) = 1.0;  // w - lo >= 0
    c.e0(2 * l) = -lo(l);
    c.A(2 * l + 1, l) = -1.0;  // hi - w >= 0
    c.e0(2 * l + 1) = hi(l);
  }
  return c;
}

PolytopeCost PolytopeCost::stack(const PolytopeCost& a, const PolytopeCost& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  if (a.A.cols() != b.A.cols()) throw std::invalid_argument("cost: input count mismatch");
  PolytopeCost c;
  c.A.resize(a.A.rows() + b.A.rows(), a.A.cols());
  c.A << a.A, b.A;
  c.e0.resize(a.e0.size() + b.e0.size());
  c.e0 << a.e0, b.e0;
  c.e1.resize(a.e1.size() + b.e1.size());
  c.e1 << a.e1, b.e1;
  return c;
}

double PolytopeCost::cost_of(const Eigen::VectorXd& w) const {
  // Row j: r_j + e1_j z >= 0 with r_j = A_j w + e0_j.
  double z = 0.0;
  const Eigen::VectorXd r = A * w + e0;
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    if (e1(j) > 0.0) {
      z = std::max(z, -r(j) / e1(j));
    } else if (e1(j) == 0.0) {
      if (r(j) < -1e-12) return std::numeric_limits<double>::infinity();
    }
  }
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    if (e1(j) < 0.0 && r(j) + e1(j) * z < -1e-12) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return z;
}

void CrashProblem::validate() const {
  const int nn = n();
  if (nn < 1) throw std::invalid_argument("dynamics: no states");
  for (const auto& fl : dynamics.f) {
    if (static_cast<int>(fl.size()) != nn) {
      throw std::invalid_argument("dynamics: input field has wrong dimension");
    }
  }
  if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
  if (!(J_max > 0.0)) throw std::invalid_argument("J_max must be positive");
  if (!(Q_max >= J_max) || !std::isfinite(Q_max)) {
    throw std::invalid_argument("need J_max <= Q_max < inf");
  }
  if (cost.rows() > 0) {
    if (cost.A.cols() != num_inputs()) {
      throw std::invalid_argument("cost: A has " + std::to_string(cost.A.cols()) +
                                  " columns, expected " +
                                  std::to_string(num_inputs()));
    }
    if (cost.e0.size() != cost.A.rows() || cost.e1.size() != cost.A.rows()) {
      throw std::invalid_argument("cost: e0/e1 length mismatch");
    }
  } else if (num_inputs() > 0) {
    throw std::invalid_argument("cost: inputs present but no cost rows");
  }
  if (x_lo.size() != nn || x_hi.size() != nn) {
    throw std::invalid_argument("x_box: expected " + std::to_string(nn) + " entries");
  }
  for (int i = 0; i < nn; ++i) {
    if (!(x_lo(i) < x_hi(i))) throw std::invalid_argument("x_box: empty");
  }
  for (const auto* s : {&X, &X0, &Xu}) {
    if (s->space().n_states() != nn) {
      throw std::invalid_argument("set dimension differs from dynamics");
    }
  }
}

std::optional<Eigen::VectorXd> CrashProblem::initial_point() const {
  const auto fixed = X0.fixed_coordinates();
  Eigen::VectorXd p(n());
  std::vector<bool> seen(static_cast<std::size_t>(n()), false);
  for (const auto& b : fixed) {
    if (X0.space().block_of(b.var) != Block::state) continue;
    const int i = X0.space().offset_in_block(b.var);
    p(i) = b.value;
    seen[static_cast<std::size_t>(i)] = true;
  }
  if (std::all_of(seen.begin(), seen.end(), [](bool s) { return s; })) return p;
  return std::nullopt;
}

CrashProblem crash_problem_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("/: expected object");
  CrashProblem pb;
  pb.name = j.value("name", "");
  const int n = at_path("/n", [&] { return j.at("n").get<int>(); });
  if (n < 1 || n > 8) throw std::invalid_argument("/n: out of range");
  at_path("/dynamics", [&] {
    const auto& d = j.at("dynamics");
    pb.dynamics.f0 = at_path("/dynamics/f0", [&] { return read_field(d.at("f0"), n); });
    if (d.contains("f")) {
      const auto& fs = d.at("f");
      if (!fs.is_array()) throw std::invalid_argument("/dynamics/f: expected array");
      for (std::size_t l = 0; l < fs.size(); ++l) {
        pb.dynamics.f.push_back(at_path("/dynamics/f/" + std::to_string(l),
                                        [&] { return read_field(fs[l], n); }));
      }
    }
    return 0;
  });
  for (const char* key : {"X", "X0", "Xu"}) {
    const std::string path = std::string("/") + key;
    auto set = at_path(path, [&] { return set_from_json(j.at(key), n); });
    if (std::string(key) == "X") pb.X = set;
    else if (std::string(key) == "X0") pb.X0 = set;
    else pb.Xu = set;
  }
  pb.T = at_path("/T", [&] { return j.at("T").get<double>(); });
  pb.J_max = at_path("/J_max", [&] { return j.at("J_max").get<double>(); });
  pb.Q_max = at_path("/Q_max", [&] { return j.value("Q_max", pb.J_max); });
  pb.scaling = at_path("/scaling", [&] { return j.value("scaling", true); });

  const int L = pb.dynamics.num_inputs();
  if (j.contains("cost")) {
    at_path("/cost", [&] {
      const auto& c = j.at("cost");
      PolytopeCost cost;
      if (c.contains("A")) {
        cost.A = at_path("/cost/A", [&] { return as_matrix(c.at("A"), L); });
        cost.e0 = at_path("/cost/e0", [&] { return to_eigen(as_vector(c.at("e0"))); });
        cost.e1 = at_path("/cost/e1", [&] { return to_eigen(as_vector(c.at("e1"))); });
      }
      if (c.contains("Gamma")) {
        const Eigen::MatrixXd g =
            at_path("/cost/Gamma", [&] { return as_matrix(c.at("Gamma"), L); });
        const Eigen::VectorXd h =
            at_path("/cost/h", [&] { return to_eigen(as_vector(c.at("h"))); });
        cost = PolytopeCost::stack(
            cost, at_path("/cost/h", [&] { return PolytopeCost::from_gamma_h(g, h); }));
      }
      if (c.value("abs_input", false)) {
        cost = PolytopeCost::stack(
            cost, PolytopeCost::from_gamma_h(Eigen::MatrixXd::Identity(L, L),
                                             Eigen::VectorXd::Zero(L)));
      }
      if (c.contains("input_box")) {
        const auto lo = at_path("/cost/input_box/lo", [&] {
          return to_eigen(as_vector(c.at("input_box").at("lo")));
        });
        const auto hi = at_path("/cost/input_box/hi", [&] {
          return to_eigen(as_vector(c.at("input_box").at("hi")));
        });
        cost = PolytopeCost::stack(
            cost, at_path("/cost/input_box", [&] { return PolytopeCost::input_box(lo, hi); }));
      }
      pb.cost = cost;
      return 0;
    });
  }

  // Bounding box of X: explicit, else from the primitive or declared radius.
  at_path("/x_box", [&] {
    if (j.contains("x_box")) {
      pb.x_lo = to_eigen(as_vector(j["x_box"].at("lo")));
      pb.x_hi = to_eigen(as_vector(j["x_box"].at("hi")));
    } else if (j["X"].contains("box")) {
      pb.x_lo = to_eigen(as_vector(j["X"]["box"].at("lo")));
      pb.x_hi = to_eigen(as_vector(j["X"]["box"].at("hi")));
    } else if (j["X"].contains("ball")) {
      const auto c = to_eigen(as_vector(j["X"]["ball"].at("center")));
      const double r = std::sqrt(j["X"]["ball"].at("radius_sq").get<double>());
      pb.x_lo = c.array() - r;
      pb.x_hi = c.array() + r;
    } else if (pb.X.declared_radius()) {
      const double r = std::sqrt(*pb.X.declared_radius());
      pb.x_lo = Eigen::VectorXd::Constant(n, -r);
      pb.x_hi = Eigen::VectorXd::Constant(n, r);
    } else {
      throw std::invalid_argument("required when X has no box, ball or radius");
    }
    return 0;
  });
  at_path("", [&] {
    pb.validate();
    return 0;
  });
  return pb;
}

json to_json(const CrashProblem& pb) {
  json f0 = json::array();
  for (const auto& p : pb.dynamics.f0) f0.push_back(to_json(p));
  json fs = json::array();
  for (const auto& fl : pb.dynamics.f) {
    json a = json::array();
    for (const auto& p : fl) a.push_back(to_json(p));
    fs.push_back(std::move(a));
  }
  json A = json::array();
  for (Eigen::Index r = 0; r < pb.cost.A.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < pb.cost.A.cols(); ++c) row.push_back(pb.cost.A(r, c));
    A.push_back(std::move(row));
  }
  json j{{"name", pb.name},
         {"n", pb.n()},
         {"dynamics", {{"f0", std::move(f0)}, {"f", std::move(fs)}}},
         {"X", to_json(pb.X)},
         {"X0", to_json(pb.X0)},
         {"Xu", to_json(pb.Xu)},
         {"T", pb.T},
         {"J_max", pb.J_max},
         {"Q_max", pb.Q_max},
         {"x_box", {{"lo", vector_json(pb.x_lo)}, {"hi", vector_json(pb.x_hi)}}},
         {"scaling", pb.scaling}};
  if (pb.cost.rows() > 0) {
    j["cost"] = {{"A", std::move(A)}, {"e0", vector_json(pb.cost.e0)},
                 {"e1", vector_json(pb.cost.e1)}};
  }
  return j;
}

Dynamics flow_dynamics() {
  const VariableSpace s = dynamics_space(2);
  const Polynomial x1 = Polynomial::variable(s, s.x(0));
  const Polynomial x2 = Polynomial::variable(s, s.x(1));
  Dynamics d;
  d.f0 = {x2, -x1 - x2 + (1.0 / 3.0) * x1 * x1 * x1};
  d.f = {{Polynomial(s), Polynomial::constant(s, 1.0)}};
  return d;
}

namespace {

BasicSemialgebraicSet halfcircle_unsafe() {
  const double c[] = {-0.25, -0.7};
  const double a[] = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  return intersect(ball_set(c, 0.25), halfspace(a, -0.95 / std::sqrt(2.0)));
}

BasicSemialgebraicSet moon_unsafe() {
  const double c1[] = {0.4, -0.4};
  const VariableSpace s(2);
  const Polynomial x1 = Polynomial::variable(s, 0);
  const Polynomial x2 = Polynomial::variable(s, 1);
  BasicSemialgebraicSet outer = ball_set(c1, 0.64);
  BasicSemialgebraicSet hole(s, block_bit(Block::state));
  const Polynomial dx = x1 - Polynomial::constant(s, 0.6596);
  const Polynomial dy = x2 - Polynomial::constant(s, 0.3989);
  hole.add_inequality(dx * dx + dy * dy - Polynomial::constant(s, 1.16 * 1.16));
  return intersect(outer, hole);
}

CrashProblem flow_problem(const std::string& name, double lo1, double hi1,
                          double lo2, double hi2, double T, double J_max,
                          double Q_max) {
  CrashProblem pb;
  pb.name = name;
  pb.dynamics = flow_dynamics();
  const double lo[] = {lo1, lo2};
  const double hi[] = {hi1, hi2};
  pb.X = box_set(lo, hi);
  pb.x_lo = Eigen::Vector2d(lo1, lo2);
  pb.x_hi = Eigen::Vector2d(hi1, hi2);
  pb.T = T;
  pb.J_max = J_max;
  pb.Q_max = Q_max;
  pb.cost = PolytopeCost::from_gamma_h(Eigen::MatrixXd::Ones(1, 1),
                                       Eigen::VectorXd::Zero(1));
  return pb;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"motivating-top", "motivating-bottom", "halfcircle", "halfcircle-disk",
          "moon"};
}

CrashProblem preset_problem(const std::string& name) {
  if (name == "motivating-top" || name == "motivating-bottom") {
    CrashProblem pb = flow_problem(name, -0.6, 1.75, -1.5, 1.5, 5.0, 2.0, 2.0);
    // |w| <= z together with the input range w in [-1, 1].
    pb.cost = PolytopeCost::stack(
        pb.cost, PolytopeCost::input_box(Eigen::VectorXd::Constant(1, -1.0),
                                         Eigen::VectorXd::Constant(1, 1.0)));
    const double c[] = {1.0, -0.5};
    const double a[] = {0.0, 1.0};
    pb.Xu = intersect(halfspace(a, -0.5), ball_set(c, 0.25));
    const double top[] = {0.0, 1.0};
    const double bottom[] = {1.2966, -1.5};
    pb.X0 = point_set(name == "motivating-top" ? std::span<const double>(top)
                                               : std::span<const double>(bottom));
    pb.validate();
    return pb;
  }
  if (name == "halfcircle" || name == "halfcircle-disk") {
    CrashProblem pb = flow_problem(name, -2.0, 2.0, -2.0, 2.0, 5.0, 1.0, 4.0);
    pb.Xu = halfcircle_unsafe();
    const double x0[] = {1.0, 0.0};
    pb.X0 = name == "halfcircle" ? point_set(x0) : ball_set(x0, 0.16);
    pb.validate();
    return pb;
  }
  if (name == "moon") {
    CrashProblem pb = flow_problem(name, -2.0, 2.0, -2.0, 2.0, 5.0, 1.0, 4.0);
    pb.Xu = moon_unsafe();
    const double x0[] = {0.0, 0.0};
    pb.X0 = point_set(x0);
    pb.validate();
    return pb;
  }
  throw std::invalid_argument("unknown preset \"" + name + "\"");
}

}  // namespace crashcert
