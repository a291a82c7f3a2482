#include "crashcert/oracle/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <utility>

#include "crashcert/sos/program_builder.hpp"

namespace crashcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Input-polytope vertices precomputed per budget in direction mode.
constexpr int kPoolSize = 64;

// Flat term list for fast repeated evaluation of a fixed polynomial.
class CompiledPoly {
 public:
  CompiledPoly() = default;
  explicit CompiledPoly(const Polynomial& p) {
    const int nv = p.space().size();
    for (const auto& [e, c] : p.terms()) {
      Term t;
      t.c = c;
      for (int v = 0; v < nv; ++v) {
        if (e[v] > 0) t.factors.emplace_back(v, e[v]);
      }
      terms_.push_back(std::move(t));
    }
  }
  bool empty() const { return terms_.empty(); }
  double operator()(const double* pt) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double m = t.c;
      for (const auto& [v, k] : t.factors) {
        const double y = pt[v];
        for (int j = 0; j < k; ++j) m *= y;
      }
      s += m;
    }
    return s;
  }

 private:
  struct Term {
    double c = 0.0;
    std::vector<std::pair<int, int>> factors;
  };
  std::vector<Term> terms_;
};

// Right-hand side f0 + sum_l w_l f_l over the point (t, x).
class CompiledDynamics {
 public:
  explicit CompiledDynamics(const Dynamics& d) : n_(d.n()), L_(d.num_inputs()) {
    for (const auto& p : d.f0) f0_.emplace_back(p);
    for (int l = 0; l < L_; ++l) {
      for (int i = 0; i < n_; ++i) {
        const auto& p = d.f[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
        if (!p.is_zero()) fl_.push_back({l, i, CompiledPoly(p)});
      }
    }
  }
  void operator()(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                  Eigen::VectorXd& out) const {
    std::array<double, kMaxVariables + 1> buf{};
    buf[0] = t;
    for (int i = 0; i < n_; ++i) buf[static_cast<std::size_t>(i + 1)] = x(i);
    out.resize(n_);
    for (int i = 0; i < n_; ++i) out(i) = f0_[static_cast<std::size_t>(i)](buf.data());
    for (const auto& e : fl_) {
      if (w(e.l) != 0.0) out(e.i) += w(e.l) * e.p(buf.data());
    }
  }
  // Input matrix F(t, x) (n x L) with columns f_l.
  void input_matrix(double t, const Eigen::VectorXd& x, Eigen::MatrixXd& F) const {
    std::array<double, kMaxVariables + 1> buf{};
    buf[0] = t;
    for (int i = 0; i < n_; ++i) buf[static_cast<std::size_t>(i + 1)] = x(i);
    F.setZero(n_, L_);
    for (const auto& e : fl_) F(e.i, e.l) += e.p(buf.data());
  }

 private:
  struct Entry {
    int l;
    int i;
    CompiledPoly p;
  };
  int n_;
  int L_;
  std::vector<CompiledPoly> f0_;
  std::vector<Entry> fl_;
};

void rk4_step(const CompiledDynamics& f, double t, double h, const Eigen::VectorXd& w,
              Eigen::VectorXd& x, Eigen::VectorXd (&k)[4]) {
  f(t, x, w, k[0]);
  f(t + 0.5 * h, x + 0.5 * h * k[0], w, k[1]);
  f(t + 0.5 * h, x + 0.5 * h * k[1], w, k[2]);
  f(t + h, x + h * k[2], w, k[3]);
  x += (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
}

// Inequalities (and equalities) of a state set, compiled, with gradients.
struct CompiledSet {
  std::vector<CompiledPoly> g;
  std::vector<std::vector<CompiledPoly>> grad;
  std::vector<CompiledPoly> h;

  CompiledSet() = default;
  explicit CompiledSet(const BasicSemialgebraicSet& s) {
    const VariableSpace& sp = s.space();
    for (const auto& p : s.inequalities()) {
      g.emplace_back(p);
      std::vector<CompiledPoly> gr;
      for (int i = 0; i < sp.n_states(); ++i) gr.emplace_back(differentiate(p, sp.x(i)));
      grad.push_back(std::move(gr));
    }
    for (const auto& p : s.equalities()) h.emplace_back(p);
  }
  bool contains(const double* x, double tol) const {
    for (const auto& p : g) {
      if (p(x) < -tol) return false;
    }
    for (const auto& p : h) {
      if (std::abs(p(x)) > tol) return false;
    }
    return true;
  }
  // Smallest constraint value normalized by its gradient norm: a signed
  // distance surrogate that is >= 0 exactly on the set (inequalities only).
  double surrogate(const double* x, int n) const {
    double s = kInf;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double gn = 0.0;
      for (int j = 0; j < n; ++j) {
        const double d = grad[i][static_cast<std::size_t>(j)](x);
        gn += d * d;
      }
      s = std::min(s, g[i](x) / std::max(std::sqrt(gn), 1e-6));
    }
    for (const auto& p : h) s = std::min(s, -std::abs(p(x)));
    return s;
  }
};

// The state set must live over the states only (no t, z or w).
std::vector<double> state_point(const BasicSemialgebraicSet& s, const Eigen::VectorXd& x) {
  const VariableSpace& sp = s.space();
  std::vector<double> pt(static_cast<std::size_t>(sp.size()), 0.0);
  for (int i = 0; i < sp.n_states(); ++i) pt[static_cast<std::size_t>(sp.x(i))] = x(i);
  return pt;
}

void require_state_set(const BasicSemialgebraicSet& s, const char* what) {
  const VariableSpace& sp = s.space();
  if (sp.has_time() || sp.has_z() || sp.n_inputs() > 0) {
    throw std::invalid_argument(std::string(what) + " must be a state-only set");
  }
}

}  // namespace

// ---------------------------------------------------------------- signals

int ControlSignal::segment_index(double t) const {
  const int K = segments();
  if (K == 0) throw std::logic_error("control signal without segments");
  const int k = static_cast<int>(std::floor(t / segment_length()));
  return std::clamp(k, 0, K - 1);
}

Eigen::VectorXd ControlSignal::at(double t) const {
  return values.row(segment_index(t)).transpose();
}

ControlSignal ControlSignal::constant(double horizon, int segments, const Eigen::VectorXd& w) {
  if (segments < 1) throw std::invalid_argument("need at least one segment");
  ControlSignal s;
  s.horizon = horizon;
  s.values = w.transpose().replicate(segments, 1);
  return s;
}

Trajectory simulate(const Dynamics& dyn, const Eigen::VectorXd& x0,
                    const ControlSignal& signal, double step,
                    const Eigen::VectorXd& escape_lo, const Eigen::VectorXd& escape_hi) {
  if (!(step > 0.0)) throw std::invalid_argument("simulate: step must be positive");
  if (x0.size() != dyn.n()) throw std::invalid_argument("simulate: x0 dimension mismatch");
  if (signal.segments() < 1 || signal.values.cols() != dyn.num_inputs()) {
    throw std::invalid_argument("simulate: signal shape does not match the inputs");
  }
  const double len = signal.segment_length();
  const double ratio = len / step;
  const long per_seg = std::lround(ratio);
  if (per_seg < 1 || std::abs(ratio - static_cast<double>(per_seg)) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("simulate: step must divide the segment length");
  }
  const bool check = escape_lo.size() == x0.size() && escape_hi.size() == x0.size();
  const double h = len / static_cast<double>(per_seg);
  const CompiledDynamics f(dyn);
  Trajectory tr;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd k[4];
  tr.t.push_back(0.0);
  tr.x.push_back(x);
  for (int s = 0; s < signal.segments(); ++s) {
    const Eigen::VectorXd w = signal.values.row(s).transpose();
    for (long j = 0; j < per_seg; ++j) {
      const double t = s * len + static_cast<double>(j) * h;
      rk4_step(f, t, h, w, x, k);
      tr.t.push_back(s * len + static_cast<double>(j + 1) * h);
      tr.x.push_back(x);
      if (check && ((x.array() < escape_lo.array()).any() || (x.array() > escape_hi.array()).any() ||
                    !x.allFinite())) {
        tr.truncated = true;
        return tr;
      }
    }
  }
  return tr;
}

// ---------------------------------------------------------------- distance

SetDistance::SetDistance(const BasicSemialgebraicSet& S, const Eigen::VectorXd& lo,
                         const Eigen::VectorXd& hi) {
  require_state_set(S, "distance target");
  const VariableSpace& sp = S.space();
  const int n = sp.n_states();
  auto classify = [&](const Polynomial& p, bool equality) {
    // Linear and diagonal-quadratic coefficients.
    double c = 0.0;
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd quad = Eigen::VectorXd::Zero(n);
    for (const auto& [e, coef] : p.terms()) {
      const int deg = e.degree();
      if (deg == 0) {
        c += coef;
        continue;
      }
      int var = -1;
      for (int i = 0; i < n; ++i) {
        if (e[sp.x(i)] > 0) {
          if (var >= 0) return false;  // cross term
          var = i;
        }
      }
      if (var < 0 || deg > 2) return false;
      (deg == 1 ? lin : quad)(var) += coef;
    }
    int nq = 0;
    for (int i = 0; i < n; ++i) nq += quad(i) != 0.0 ? 1 : 0;
    if (nq == 0) {
      const int nl = static_cast<int>((lin.array() != 0.0).count());
      if (nl == 0) return c >= 0.0 && !equality;
      if (equality) {
        if (nl != 1) return false;
        int i = 0;
        lin.cwiseAbs().maxCoeff(&i);
        const double v = -c / lin(i);
        prims_.push_back({2, {}, 0.0, i, v, v});
        return true;
      }
      prims_.push_back({0, -lin, c, 0, 0.0, 0.0});
      return true;
    }
    if (equality) return false;
    if (nq == n && (quad.array() == quad(0)).all() && quad(0) < 0.0) {
      const double k = -quad(0);
      const Eigen::VectorXd ctr = lin / (2.0 * k);
      const double r_sq = c / k + ctr.squaredNorm();
      if (!(r_sq >= 0.0)) return false;
      prims_.push_back({1, ctr, r_sq, 0, 0.0, 0.0});
      return true;
    }
    if (nq == 1) {
      int i = 0;
      quad.cwiseAbs().maxCoeff(&i);
      for (int j = 0; j < n; ++j) {
        if (j != i && lin(j) != 0.0) return false;
      }
      const double k = -quad(i);
      if (!(k > 0.0)) return false;
      const double disc = lin(i) * lin(i) + 4.0 * k * c;
      if (disc < 0.0) return false;
      const double r = std::sqrt(disc);
      prims_.push_back({2, {}, 0.0, i, (lin(i) - r) / (2.0 * k), (lin(i) + r) / (2.0 * k)});
      return true;
    }
    return false;
  };
  for (const auto& g : S.inequalities()) exact_ = classify(g, false) && exact_;
  for (const auto& h : S.equalities()) exact_ = classify(h, true) && exact_;
  if (exact_) return;

  if (lo.size() != n || hi.size() != n) {
    throw std::invalid_argument("distance: sampling box required for a general set");
  }
  const CompiledSet cs(S);
  std::vector<double> pt(static_cast<std::size_t>(sp.size()), 0.0);
  auto consider = [&](const Eigen::VectorXd& y) {
    for (int i = 0; i < n; ++i) pt[static_cast<std::size_t>(sp.x(i))] = y(i);
    if (cs.contains(pt.data(), kMembershipTolerance)) cloud_.push_back(y);
  };
  if (n <= 3) {
    const int per = n == 1 ? 100000 : (n == 2 ? 600 : 120);
    long total = 1;
    for (int i = 0; i < n; ++i) total *= per;
    Eigen::VectorXd y(n);
    for (long idx = 0; idx < total; ++idx) {
      long r = idx;
      for (int i = 0; i < n; ++i) {
        const long k = r % per;
        r /= per;
        y(i) = lo(i) + (hi(i) - lo(i)) * static_cast<double>(k) / (per - 1);
      }
      consider(y);
    }
  } else {
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd y(n);
    for (int s = 0; s < 400000; ++s) {
      for (int i = 0; i < n; ++i) y(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
      consider(y);
    }
  }
}

Eigen::VectorXd SetDistance::project(const Eigen::VectorXd& x) const {
  auto proj_one = [](const Primitive& p, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    Eigen::VectorXd r = y;
    if (p.kind == 0) {
      const double viol = p.a.dot(y) - p.b;
      if (viol > 0.0) r -= viol / p.a.squaredNorm() * p.a;
    } else if (p.kind == 1) {
      const Eigen::VectorXd d = y - p.a;
      const double nd = d.norm();
      const double rad = std::sqrt(p.b);
      if (nd > rad) r = p.a + d * (rad / nd);
    } else {
      r(p.coord) = std::clamp(y(p.coord), p.lo, p.hi);
    }
    return r;
  };
  if (prims_.size() == 1) return proj_one(prims_[0], x);
  // Dykstra's alternating projections onto the convex primitives.
  Eigen::VectorXd y = x;
  std::vector<Eigen::VectorXd> inc(prims_.size(), Eigen::VectorXd::Zero(x.size()));
  for (int it = 0; it < 5000; ++it) {
    const Eigen::VectorXd prev = y;
    for (std::size_t i = 0; i < prims_.size(); ++i) {
      const Eigen::VectorXd zt = y + inc[i];
      y = proj_one(prims_[i], zt);
      inc[i] = zt - y;
    }
    if ((y - prev).norm() < 1e-14) break;
  }
  return y;
}

double SetDistance::operator()(const Eigen::VectorXd& x) const {
  if (exact_) {
    if (prims_.empty()) return 0.0;
    return (project(x) - x).norm();
  }
  double best = kInf;
  for (const auto& y : cloud_) best = std::min(best, (y - x).squaredNorm());
  return std::sqrt(best);
}

double trajectory_distance(const CrashProblem& pb, const Eigen::VectorXd& x0,
                           const ControlSignal& signal, double step) {
  const Trajectory tr = simulate(pb.dynamics, x0, signal, step);
  const SetDistance dist(pb.Xu, pb.x_lo, pb.x_hi);
  double best = kInf;
  for (const auto& x : tr.x) best = std::min(best, dist(x));
  return best;
}

// ---------------------------------------------------------------- search

namespace {

class Searcher {
 public:
  Searcher(const CrashProblem& pb, const UpperBoundOptions& opt)
      : pb_(pb), opt_(opt), f_(pb.dynamics), X_(pb.X), Xu_(pb.Xu), X0_(pb.X0) {
    require_state_set(pb.X, "X");
    require_state_set(pb.Xu, "Xu");
    require_state_set(pb.X0, "X0");
    if (opt.segments < 1 || opt.substeps < 1 || opt.restarts < 1) {
      throw std::invalid_argument("upper bound: segments, substeps and restarts must be >= 1");
    }
    n_ = pb.n();
    L_ = pb.num_inputs();
    fixed_x0_ = pb.initial_point();
    if (!fixed_x0_) {
      // Sampling box for x0: the box of X tightened by the ball/slab parts of X0.
      x0_lo_ = pb.x_lo;
      x0_hi_ = pb.x_hi;
      tighten_x0_box();
    }
    h_ = pb.T / (opt.segments * opt.substeps);
    // With more inputs than states, search over state-space directions and
    // realise each by a vertex of the input polytope (see input_toward).
    direction_mode_ = L_ > n_;
    per_segment_ = direction_mode_ ? n_ : L_;
  }

  int dimension() const { return (fixed_x0_ ? 0 : n_) + opt_.segments * per_segment_; }

  // Sets the budget; false when the input polytope is empty at z.
  bool prepare(double z) {
    z_ = z;
    b_ = pb_.cost.e0 + pb_.cost.e1 * z;
    ProgramBuilder lp;
    std::vector<int> w(static_cast<std::size_t>(L_));
    for (auto& id : w) id = lp.add_free();
    const int r = lp.add_nonneg();
    for (int j = 0; j < pb_.cost.rows(); ++j) {
      AffineExpr e(b_(j));
      for (int l = 0; l < L_; ++l) {
        e.add_scaled(AffineExpr::variable(w[static_cast<std::size_t>(l)]), pb_.cost.A(j, l));
      }
      e.add_scaled(AffineExpr::variable(r), -pb_.cost.A.row(j).norm());
      e.add_scaled(AffineExpr::variable(lp.add_nonneg()), -1.0);
      lp.constrain_equal(e, "row");
    }
    AffineExpr cap(1e3);
    cap.add_scaled(AffineExpr::variable(r), -1.0);
    cap.add_scaled(AffineExpr::variable(lp.add_nonneg()), -1.0);
    lp.constrain_equal(cap, "cap");
    lp.set_objective(AffineExpr::variable(r), Sense::maximize);
    const SosSolution sol = lp.solve();
    if (!is_solved(sol.status)) return false;
    center_.resize(L_);
    for (int l = 0; l < L_; ++l) center_(l) = sol.value(w[static_cast<std::size_t>(l)]);
    // Pull the center back inside when the solver's iterate is marginally out.
    const Eigen::VectorXd slack = pb_.cost.A * center_ + b_;
    if (slack.minCoeff() < -1e-7) return false;
    if (direction_mode_) build_vertex_pool();
    return true;
  }

  // Maximizer of c.w over the input polytope at the current budget.
  std::optional<Eigen::VectorXd> lp_vertex(const Eigen::VectorXd& c) const {
    ProgramBuilder lp;
    std::vector<int> w(static_cast<std::size_t>(L_));
    for (auto& id : w) id = lp.add_free();
    for (int j = 0; j < pb_.cost.rows(); ++j) {
      AffineExpr e(b_(j));
      for (int l = 0; l < L_; ++l) {
        e.add_scaled(AffineExpr::variable(w[static_cast<std::size_t>(l)]), pb_.cost.A(j, l));
      }
      e.add_scaled(AffineExpr::variable(lp.add_nonneg()), -1.0);
      lp.constrain_equal(e, "row");
    }
    AffineExpr obj;
    for (int l = 0; l < L_; ++l) {
      obj.add_scaled(AffineExpr::variable(w[static_cast<std::size_t>(l)]), c(l));
    }
    lp.set_objective(obj, Sense::maximize);
    const SosSolution sol = lp.solve();
    if (!is_solved(sol.status)) return std::nullopt;
    Eigen::VectorXd v(L_);
    for (int l = 0; l < L_; ++l) v(l) = sol.value(w[static_cast<std::size_t>(l)]);
    // Interior-point iterates can sit marginally outside; pull toward the center.
    for (double shrink = 1.0; shrink > 0.0; shrink -= 0.001) {
      const Eigen::VectorXd u = center_ + shrink * (v - center_);
      if ((pb_.cost.A * u + b_).minCoeff() >= 0.0) return u;
    }
    return center_;
  }

  // Vertices of the input polytope maximizing F(x)^T theta for sampled states
  // x in X and directions theta; deterministic in the budget.
  void build_vertex_pool() {
    pool_.clear();
    std::mt19937_64 rng(0x5DEECE66DULL);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd F;
    int attempts = 0;
    while (static_cast<int>(pool_.size()) < kPoolSize && attempts < 100 * kPoolSize) {
      ++attempts;
      Eigen::VectorXd x(n_);
      for (int i = 0; i < n_; ++i) x(i) = pb_.x_lo(i) + (pb_.x_hi(i) - pb_.x_lo(i)) * U(rng);
      const auto pt = state_point(pb_.X, x);
      if (!X_.contains(pt.data(), 0.0)) continue;
      Eigen::VectorXd theta(n_);
      for (int i = 0; i < n_; ++i) theta(i) = N(rng);
      f_.input_matrix(pb_.T * U(rng), x, F);
      const Eigen::VectorXd c = F.transpose() * theta;
      if (c.norm() < 1e-12) continue;
      if (auto v = lp_vertex(c)) pool_.push_back(*v);
    }
  }

  // Input that pushes the state at (t, x) toward direction theta (entries in
  // [-1,1]): the pool vertex best aligned with F^T theta, scaled from the
  // center by |theta|_inf. Always inside the input polytope.
  Eigen::VectorXd input_toward(const double* theta, double t, const Eigen::VectorXd& x) const {
    double m = 0.0;
    Eigen::VectorXd th(n_);
    for (int i = 0; i < n_; ++i) {
      th(i) = theta[i];
      m = std::max(m, std::abs(theta[i]));
    }
    if (m < 1e-15 || pool_.empty()) return center_;
    Eigen::MatrixXd F;
    f_.input_matrix(t, x, F);
    const Eigen::VectorXd c = F.transpose() * th;
    std::size_t best = 0;
    double score = -kInf;
    for (std::size_t k = 0; k < pool_.size(); ++k) {
      const double v = c.dot(pool_[k] - center_);
      if (v > score) {
        score = v;
        best = k;
      }
    }
    if (score <= 0.0) return center_;
    return center_ + m * (pool_[best] - center_);
  }

  // Radial map of u in [-1,1]^L onto the input polytope at the current budget.
  Eigen::VectorXd input_of(const double* u) const {
    Eigen::VectorXd w = center_;
    if (L_ == 0) return w;
    Eigen::VectorXd d(L_);
    double m = 0.0;
    for (int l = 0; l < L_; ++l) {
      d(l) = u[l];
      m = std::max(m, std::abs(u[l]));
    }
    if (m < 1e-15) return w;
    d /= m;
    const Eigen::VectorXd ad = pb_.cost.A * d;
    const Eigen::VectorXd slack = (pb_.cost.A * center_ + b_).cwiseMax(0.0);
    double smax = 1e6;
    for (Eigen::Index j = 0; j < ad.size(); ++j) {
      if (ad(j) < -1e-14) smax = std::min(smax, slack(j) / -ad(j));
    }
    return center_ + (m * smax * (1.0 - 1e-12)) * d;
  }

  struct Eval {
    double score = -kInf;
    bool hit = false;
    double t_stop = 0.0;
  };

  Eval run(const std::vector<double>& p, Trajectory* record = nullptr,
           Eigen::MatrixXd* applied = nullptr) const {
    Eval ev;
    Eigen::VectorXd x(n_);
    std::size_t off = 0;
    if (fixed_x0_) {
      x = *fixed_x0_;
    } else {
      for (int i = 0; i < n_; ++i) {
        x(i) = x0_lo_(i) + 0.5 * (p[static_cast<std::size_t>(i)] + 1.0) * (x0_hi_(i) - x0_lo_(i));
      }
      off = static_cast<std::size_t>(n_);
      const auto pt = state_point(pb_.X0, x);
      if (!X0_.contains(pt.data(), kMembershipTolerance)) {
        ev.score = -1e3 + std::min(0.0, X0_.surrogate(pt.data(), n_));
        return ev;
      }
    }
    auto visit = [&](double t, const Eigen::VectorXd& y) {
      if (record) {
        record->t.push_back(t);
        record->x.push_back(y);
      }
      const auto pt = state_point(pb_.X, y);
      if (!y.allFinite() || !X_.contains(pt.data(), kMembershipTolerance)) return false;
      const auto pu = state_point(pb_.Xu, y);
      const double s = Xu_.surrogate(pu.data(), n_);
      if (s >= 0.0 && Xu_.contains(pu.data(), kMembershipTolerance)) {
        ev.hit = true;
        ev.score = 1.0;
        ev.t_stop = t;
        return false;
      }
      ev.score = std::max(ev.score, s);
      return true;
    };
    if (applied) {
      // Segments after the stop keep their nominal input.
      applied->resize(opt_.segments, L_);
      for (int s = 0; s < opt_.segments; ++s) {
        applied->row(s) =
            (direction_mode_
                 ? center_
                 : input_of(p.data() + off + static_cast<std::size_t>(s * per_segment_)))
                .transpose();
      }
    }
    if (!visit(0.0, x)) return ev;
    Eigen::VectorXd k[4];
    for (int s = 0; s < opt_.segments; ++s) {
      const double* ps = p.data() + off + static_cast<std::size_t>(s * per_segment_);
      const Eigen::VectorXd w =
          direction_mode_ ? input_toward(ps, s * opt_.substeps * h_, x) : input_of(ps);
      if (applied) applied->row(s) = w.transpose();
      for (int j = 0; j < opt_.substeps; ++j) {
        const double t = (s * opt_.substeps + j) * h_;
        rk4_step(f_, t, h_, w, x, k);
        if (!visit(t + h_, x)) return ev;
      }
    }
    return ev;
  }

  // Multistart coordinate descent at the current budget. Returns the first
  // restart (in index order) that reaches Xu together with its parameters.
  std::optional<std::pair<std::vector<double>, Eval>> search(
      std::uint64_t stream, const std::vector<double>* warm) const {
    const int P = dimension();
    const int R = opt_.restarts;
    std::vector<std::optional<std::pair<std::vector<double>, Eval>>> found(
        static_cast<std::size_t>(R));
#pragma omp parallel for schedule(static)
    for (int r = 0; r < R; ++r) {
      std::mt19937_64 rng(opt_.seed * 0x9E3779B97F4A7C15ULL + stream * 1000003ULL +
                          static_cast<std::uint64_t>(r));
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      // Restart 0: warm start (or the polytope center with x0 at the center
      // of its box); 1 and 2: extreme constant inputs; the rest random.
      std::vector<double> p(static_cast<std::size_t>(P), 0.0);
      const std::size_t u0 = fixed_x0_ ? 0 : static_cast<std::size_t>(n_);
      if (r == 0 && warm && static_cast<int>(warm->size()) == P) {
        p = *warm;
      } else if (r == 1 || r == 2) {
        for (std::size_t i = u0; i < p.size(); ++i) p[i] = r == 1 ? 1.0 : -1.0;
      } else if (r >= 3) {
        for (auto& v : p) v = unit(rng);
      }
      found[static_cast<std::size_t>(r)] = descend(p, rng);
    }
    for (auto& f : found) {
      if (f) return f;
    }
    return std::nullopt;
  }

  CrashWitness witness(const std::vector<double>& p, const Eval& ev) const {
    CrashWitness w;
    Trajectory tr;
    Eigen::MatrixXd applied;
    run(p, &tr, &applied);
    w.x0 = fixed_x0_ ? *fixed_x0_ : tr.x.front();
    w.signal.horizon = pb_.T;
    w.signal.values = applied;
    w.t_stop = ev.t_stop;
    const double len = w.signal.segment_length();
    w.peak_cost = 0.0;
    for (int s = 0; s < opt_.segments && s * len < w.t_stop - 1e-12; ++s) {
      w.peak_cost =
          std::max(w.peak_cost, pb_.cost.cost_of(w.signal.values.row(s).transpose()));
    }
    w.terminal = tr.x.back();
    // The terminal state lies in Xu, so the closest approach is zero.
    w.min_distance = 0.0;
    w.trajectory = std::move(tr);
    return w;
  }

 private:
  void tighten_x0_box() {
    // Balls and slabs in X0 bound the sampling box.
    const VariableSpace& sp = pb_.X0.space();
    for (const auto& g : pb_.X0.inequalities()) {
      if (g.degree() != 2) continue;
      Eigen::VectorXd quad = Eigen::VectorXd::Zero(n_);
      Eigen::VectorXd lin = Eigen::VectorXd::Zero(n_);
      double c = 0.0;
      bool ok = true;
      for (const auto& [e, coef] : g.terms()) {
        int var = -1;
        int cnt = 0;
        for (int i = 0; i < n_; ++i) {
          if (e[sp.x(i)] > 0) {
            var = i;
            ++cnt;
          }
        }
        if (cnt > 1) ok = false;
        if (e.degree() == 0) c += coef;
        else if (e.degree() == 1) lin(var) += coef;
        else if (cnt == 1) quad(var) += coef;
      }
      if (!ok) continue;
      if ((quad.array() < 0.0).all() && (quad.array() == quad(0)).all()) {
        const double k = -quad(0);
        const Eigen::VectorXd ctr = lin / (2.0 * k);
        const double rad = std::sqrt(std::max(0.0, c / k + ctr.squaredNorm()));
        x0_lo_ = x0_lo_.cwiseMax((ctr.array() - rad).matrix());
        x0_hi_ = x0_hi_.cwiseMin((ctr.array() + rad).matrix());
      }
    }
  }

  std::optional<std::pair<std::vector<double>, Eval>> descend(std::vector<double> p,
                                                              std::mt19937_64& rng) const {
    int evals = 0;
    Eval best = run(p);
    ++evals;
    if (best.hit) return std::make_pair(p, best);
    const int P = static_cast<int>(p.size());
    std::vector<int> order(static_cast<std::size_t>(P));
    for (int i = 0; i < P; ++i) order[static_cast<std::size_t>(i)] = i;
    for (double step : {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625}) {
      bool improved = true;
      while (improved && evals < opt_.max_evaluations) {
        improved = false;
        std::shuffle(order.begin(), order.end(), rng);
        for (int i : order) {
          if (evals >= opt_.max_evaluations) break;
          for (double sgn : {1.0, -1.0}) {
            std::vector<double> q = p;
            auto& qi = q[static_cast<std::size_t>(i)];
            qi = std::clamp(qi + sgn * step, -1.0, 1.0);
            if (qi == p[static_cast<std::size_t>(i)]) continue;
            const Eval e = run(q);
            ++evals;
            if (e.hit) return std::make_pair(q, e);
            if (e.score > best.score + 1e-12) {
              p = std::move(q);
              best = e;
              improved = true;
              break;
            }
          }
        }
      }
      if (evals >= opt_.max_evaluations) break;
    }
    return std::nullopt;
  }

  const CrashProblem& pb_;
  UpperBoundOptions opt_;
  CompiledDynamics f_;
  CompiledSet X_;
  CompiledSet Xu_;
  CompiledSet X0_;
  int n_ = 0;
  int L_ = 0;
  std::optional<Eigen::VectorXd> fixed_x0_;
  Eigen::VectorXd x0_lo_;
  Eigen::VectorXd x0_hi_;
  double h_ = 0.0;
  double z_ = 0.0;
  Eigen::VectorXd b_;
  Eigen::VectorXd center_;
  bool direction_mode_ = false;
  int per_segment_ = 0;
  std::vector<Eigen::VectorXd> pool_;
};

}  // namespace

std::optional<CrashWitness> crash_search_at(const CrashProblem& pb, double z,
                                            const UpperBoundOptions& opt) {
  Searcher s(pb, opt);
  if (!s.prepare(z)) return std::nullopt;
  const auto found = s.search(0, nullptr);
  if (!found) return std::nullopt;
  return s.witness(found->first, found->second);
}

std::optional<CrashWitness> crash_upper_bound(const CrashProblem& pb,
                                              const UpperBoundOptions& opt) {
  pb.validate();
  Searcher s(pb, opt);
  std::uint64_t stream = 0;
  std::optional<std::pair<std::vector<double>, double>> best;  // params, budget
  CrashWitness best_w;
  auto attempt = [&](double z) -> bool {
    if (!s.prepare(z)) {
      ++stream;
      return false;
    }
    const auto found = s.search(stream++, best ? &best->first : nullptr);
    if (!found) return false;
    best_w = s.witness(found->first, found->second);
    best = std::make_pair(found->first, z);
    return true;
  };
  if (!attempt(pb.J_max)) return std::nullopt;
  double hi = std::min(pb.J_max, best_w.peak_cost);
  if (attempt(0.0)) return best_w;
  double lo = 0.0;
  while (hi - lo > opt.tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid)) {
      hi = std::min(mid, best_w.peak_cost);
    } else {
      lo = mid;
    }
  }
  return best_w;
}

nlohmann::json to_json(const CrashWitness& w) {
  nlohmann::json j;
  j["x0"] = std::vector<double>(w.x0.data(), w.x0.data() + w.x0.size());
  nlohmann::json vals = nlohmann::json::array();
  for (Eigen::Index r = 0; r < w.signal.values.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < w.signal.values.cols(); ++c) row.push_back(w.signal.values(r, c));
    vals.push_back(row);
  }
  j["horizon"] = w.signal.horizon;
  j["segments"] = vals;
  j["t_stop"] = w.t_stop;
  j["peak_cost"] = w.peak_cost;
  j["terminal"] = std::vector<double>(w.terminal.data(), w.terminal.data() + w.terminal.size());
  j["min_distance"] = w.min_distance;
  return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
  const int n = tr.x.empty() ? 0 : static_cast<int>(tr.x.front().size());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  out << "\n" << std::setprecision(17);
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    out << tr.t[k];
    for (int i = 0; i < n; ++i) out << "," << tr.x[k](i);
    out << "\n";
  }
}

}  // namespace crashcert
