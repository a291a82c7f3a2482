#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include <Eigen/Sparse>

#include "crashcert/conic/solver.hpp"

namespace crashcert {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "numerical_failure";
}

SolveStatus solve_status_from_string(const std::string& s) {
  for (auto st : {SolveStatus::optimal, SolveStatus::near_optimal,
                  SolveStatus::infeasible, SolveStatus::unbounded,
                  SolveStatus::numerical_failure}) {
    if (to_string(st) == s) return st;
  }
  throw std::invalid_argument("unknown solve status \"" + s + "\"");
}

void SolverSettings::validate() const {
  if (!(gap_tol > 0.0) || !(feas_tol > 0.0) || !(near_tol > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
}

SolverSettings settings_from_env(SolverSettings base) {
  auto read = [](const char* name, double& target) {
    if (const char* v = std::getenv(name)) {
      char* end = nullptr;
      const double d = std::strtod(v, &end);
      if (end == v || !(d > 0.0)) {
        throw std::invalid_argument(std::string(name) + " must be a positive number");
      }
      target = d;
    }
  };
  read("CRASHCERT_SOLVER_GAP", base.gap_tol);
  read("CRASHCERT_SOLVER_FEAS", base.feas_tol);
  double maxit = base.max_iterations;
  read("CRASHCERT_SOLVER_MAXIT", maxit);
  base.max_iterations = static_cast<int>(maxit);
  base.validate();
  return base;
}

namespace {

using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

MatrixXd smat(const VectorXd& v, Eigen::Index off, int n) {
  MatrixXd X(n, n);
  Eigen::Index e = off;
  for (int j = 0; j < n; ++j) {
    X(j, j) = v[e++];
    for (int i = j + 1; i < n; ++i) {
      X(i, j) = X(j, i) = v[e++] / kSqrt2;
    }
  }
  return X;
}

void svec_into(const MatrixXd& X, VectorXd& v, Eigen::Index off) {
  const int n = static_cast<int>(X.rows());
  Eigen::Index e = off;
  for (int j = 0; j < n; ++j) {
    v[e++] = X(j, j);
    for (int i = j + 1; i < n; ++i) v[e++] = kSqrt2 * 0.5 * (X(i, j) + X(j, i));
  }
}

// Problem after presolve: rows O (scaled by D), reduced free block,
// cone block [nonneg | psd svec...].
struct Reduced {
  int m = 0;
  int nl = 0;
  std::vector<int> psd_n;
  std::vector<Eigen::Index> psd_off;  // offsets into the cone vector
  Eigen::Index ncone = 0;
  SpMat Ac;       // m x ncone, scaled
  MatrixXd Af;    // m x nf, scaled
  VectorXd b;     // scaled
  VectorXd cc;    // cone costs
  VectorXd cf;    // reduced free costs
  VectorXd D;     // row scaling
  double offset = 0.0;
  int nu = 0;     // barrier degree
};

struct Cone {
  const Reduced& P;
  // Jordan-algebra helpers on cone vectors.
  double dot(const VectorXd& a, const VectorXd& b) const { return a.dot(b); }
};

class Ipm {
 public:
  Ipm(const Reduced& P, const SchurAssembler& schur, const SolverSettings& st)
      : P_(P), schur_(schur), st_(st) {}

  struct Result {
    SolveStatus status = SolveStatus::numerical_failure;
    VectorXd xc, sc, xf, y;
    double tau = 1.0, kappa = 0.0;
    bool ray = false;  // certificate rather than solution
    int iterations = 0;
    double schur_seconds = 0.0, factor_seconds = 0.0;
    std::string message;
  };

  Result run();

 private:
  // Cone-side operations.
  VectorXd apply_H(const VectorXd& r) const;
  double max_step(const VectorXd& v, const VectorXd& dv,
                  const std::vector<Eigen::LLT<MatrixXd>>& chol) const;
  bool factor_iterate();
  bool factor_kkt();
  void solve_kkt(const VectorXd& r1, const VectorXd& r2, VectorXd& dy,
                 VectorXd& df) const;
  void raw_solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dy,
                 VectorXd& df) const;

  struct Direction {
    VectorXd dxc, dsc, dxf, dy;
    double dtau = 0.0, dkappa = 0.0;
  };
  Direction direction(double sigma_mu, double eta, const Direction* pred);

  const Reduced& P_;
  const SchurAssembler& schur_;
  const SolverSettings& st_;

  // Iterate.
  VectorXd xc_, sc_, xf_, y_;
  double tau_ = 1.0, kappa_ = 1.0;
  // Per-iteration scaling data.
  std::vector<MatrixXd> X_, Sinv_;
  std::vector<Eigen::LLT<MatrixXd>> cholX_, cholS_;
  VectorXd lin_ratio_;
  // Residuals.
  VectorXd rp_, rdc_, rdf_;
  double rg_ = 0.0;
  // KKT factorization.
  MatrixXd M_;
  Eigen::LLT<MatrixXd> llt_;
  MatrixXd W_;
  Eigen::LLT<MatrixXd> lltS_;
  VectorXd w_y_, w_f_, Hc_;
  double schur_seconds_ = 0.0, factor_seconds_ = 0.0;
};

VectorXd Ipm::apply_H(const VectorXd& r) const {
  VectorXd out(r.size());
  out.head(P_.nl) = lin_ratio_.cwiseProduct(r.head(P_.nl));
  for (std::size_t k = 0; k < P_.psd_n.size(); ++k) {
    const int n = P_.psd_n[k];
    const MatrixXd R = smat(r, P_.psd_off[k], n);
    const MatrixXd T = X_[k] * R * Sinv_[k];
    svec_into(T, out, P_.psd_off[k]);  // svec_into symmetrizes
  }
  return out;
}

double Ipm::max_step(const VectorXd& v, const VectorXd& dv,
                     const std::vector<Eigen::LLT<MatrixXd>>& chol) const {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < P_.nl; ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  for (std::size_t k = 0; k < P_.psd_n.size(); ++k) {
    const int n = P_.psd_n[k];
    MatrixXd D = smat(dv, P_.psd_off[k], n);
    // L^-1 D L^-T
    chol[k].matrixL().solveInPlace(D);
    MatrixXd Dt = D.transpose();
    chol[k].matrixL().solveInPlace(Dt);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Dt, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()[0];
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

bool Ipm::factor_iterate() {
  const std::size_t np = P_.psd_n.size();
  X_.resize(np);
  Sinv_.resize(np);
  cholX_.resize(np);
  cholS_.resize(np);
  for (std::size_t k = 0; k < np; ++k) {
    const int n = P_.psd_n[k];
    X_[k] = smat(xc_, P_.psd_off[k], n);
    const MatrixXd S = smat(sc_, P_.psd_off[k], n);
    cholX_[k].compute(X_[k]);
    cholS_[k].compute(S);
    if (cholX_[k].info() != Eigen::Success || cholS_[k].info() != Eigen::Success) {
      return false;
    }
    Sinv_[k] = cholS_[k].solve(MatrixXd::Identity(n, n));
    Sinv_[k] = 0.5 * (Sinv_[k] + Sinv_[k].transpose()).eval();
  }
  lin_ratio_ = xc_.head(P_.nl).cwiseQuotient(sc_.head(P_.nl));
  return true;
}

bool Ipm::factor_kkt() {
  SchurWeights w;
  w.lin = lin_ratio_;
  w.X = X_;
  w.Sinv = Sinv_;
  auto t0 = Clock::now();
  schur_.assemble(w, st_.kernel, M_);
  // Row scaling: M <- D M D (lower triangle).
  for (int j = 0; j < P_.m; ++j) {
    M_.col(j).tail(P_.m - j) =
        M_.col(j).tail(P_.m - j).cwiseProduct(P_.D.tail(P_.m - j)) * P_.D[j];
  }
  schur_seconds_ += seconds_since(t0);
  t0 = Clock::now();
  double maxdiag = 1.0;
  if (P_.m > 0) maxdiag = std::max(1.0, M_.diagonal().cwiseAbs().maxCoeff());
  double delta = 1e-13 * maxdiag;
  bool ok = false;
  for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
    MatrixXd Mr = M_;
    Mr.diagonal().array() += delta;
    llt_.compute(Mr);
    ok = llt_.info() == Eigen::Success;
    delta *= 100.0;
  }
  if (!ok) return false;
  if (P_.Af.cols() > 0) {
    W_ = llt_.matrixL().solve(P_.Af);
    MatrixXd Sf = W_.transpose() * W_;
    double sd = 1.0;
    if (Sf.rows() > 0) sd = std::max(1.0, Sf.diagonal().maxCoeff());
    double df = 1e-13 * sd;
    ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
      MatrixXd Sr = Sf;
      Sr.diagonal().array() += df;
      lltS_.compute(Sr);
      ok = lltS_.info() == Eigen::Success;
      df *= 100.0;
    }
    if (!ok) return false;
  }
  factor_seconds_ += seconds_since(t0);
  return true;
}

void Ipm::raw_solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dy,
                    VectorXd& df) const {
  VectorXd t = llt_.matrixL().solve(r1);
  if (P_.Af.cols() > 0) {
    df = lltS_.solve(W_.transpose() * t - r2);
    t -= W_ * df;
  } else {
    df.resize(0);
  }
  dy = llt_.matrixU().solve(t);
}

void Ipm::solve_kkt(const VectorXd& r1, const VectorXd& r2, VectorXd& dy,
                    VectorXd& df) const {
  raw_solve(r1, r2, dy, df);
  // Iterative refinement against the unregularized system.
  for (int it = 0; it < 3; ++it) {
    VectorXd e1 = r1 - M_.selfadjointView<Eigen::Lower>() * dy;
    VectorXd e2 = r2;
    if (P_.Af.cols() > 0) {
      e1 -= P_.Af * df;
      e2 -= P_.Af.transpose() * dy;
    }
    const double err = std::max(e1.lpNorm<Eigen::Infinity>(),
                                e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0);
    const double scale = 1.0 + std::max(r1.lpNorm<Eigen::Infinity>(),
                                        r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0);
    if (err <= 1e-14 * scale) break;
    VectorXd cy, cf;
    raw_solve(e1, e2, cy, cf);
    dy += cy;
    if (df.size()) df += cf;
  }
}

Ipm::Direction Ipm::direction(double sigma_mu, double eta, const Direction* pred) {
  const Eigen::Index nc = P_.ncone;
  // E = sigma mu S^-1 - X - corr.
  VectorXd E(nc);
  for (int i = 0; i < P_.nl; ++i) {
    double corr = pred ? pred->dxc[i] * pred->dsc[i] : 0.0;
    E[i] = (sigma_mu - corr) / sc_[i] - xc_[i];
  }
  for (std::size_t k = 0; k < P_.psd_n.size(); ++k) {
    const int n = P_.psd_n[k];
    MatrixXd Ek = sigma_mu * Sinv_[k] - X_[k];
    if (pred) {
      const MatrixXd dX = smat(pred->dxc, P_.psd_off[k], n);
      const MatrixXd dS = smat(pred->dsc, P_.psd_off[k], n);
      Ek -= dX * dS * Sinv_[k];
    }
    svec_into(Ek, E, P_.psd_off[k]);
  }
  const double corr_tk = pred ? pred->dtau * pred->dkappa : 0.0;

  const VectorXd Hrd = apply_H(eta * rdc_);
  VectorXd r1 = eta * rp_ - P_.Ac * E + P_.Ac * Hrd;
  VectorXd r2 = eta * rdf_;
  VectorXd uy, uf;
  solve_kkt(r1, r2, uy, uf);

  const VectorXd q0 = E - Hrd + apply_H(P_.Ac.transpose() * uy);
  const VectorXd q1 = apply_H(P_.Ac.transpose() * w_y_) - Hc_;
  double coef = -kappa_ / tau_ + P_.cc.dot(q1) - P_.b.dot(w_y_);
  double rhs = -eta * rg_ - (sigma_mu - tau_ * kappa_ - corr_tk) / tau_ -
               P_.cc.dot(q0) + P_.b.dot(uy);
  if (P_.cf.size()) {
    coef += P_.cf.dot(w_f_);
    rhs -= P_.cf.dot(uf);
  }
  Direction d;
  d.dtau = rhs / coef;
  d.dy = uy + d.dtau * w_y_;
  d.dxf = P_.cf.size() ? VectorXd(uf + d.dtau * w_f_) : VectorXd();
  d.dxc = q0 + d.dtau * q1;
  d.dsc = eta * rdc_ - P_.Ac.transpose() * d.dy + d.dtau * P_.cc;
  d.dkappa = (sigma_mu - tau_ * kappa_ - corr_tk) / tau_ - (kappa_ / tau_) * d.dtau;
  return d;
}

Ipm::Result Ipm::run() {
  const Eigen::Index nc = P_.ncone;
  const Eigen::Index nf = P_.Af.cols();
  xc_ = VectorXd::Zero(nc);
  sc_ = VectorXd::Zero(nc);
  xc_.head(P_.nl).setOnes();
  sc_.head(P_.nl).setOnes();
  for (std::size_t k = 0; k < P_.psd_n.size(); ++k) {
    const MatrixXd I = MatrixXd::Identity(P_.psd_n[k], P_.psd_n[k]);
    svec_into(I, xc_, P_.psd_off[k]);
    svec_into(I, sc_, P_.psd_off[k]);
  }
  xf_ = VectorXd::Zero(nf);
  y_ = VectorXd::Zero(P_.m);
  tau_ = 1.0;
  kappa_ = 1.0;

  const double bnorm = P_.b.norm();
  const double cnorm = std::sqrt(P_.cc.squaredNorm() + P_.cf.squaredNorm());
  Result best;
  double best_metric = std::numeric_limits<double>::infinity();
  int stalls = 0;
  int best_iter = 0;
  Result res;

  auto snapshot = [&](SolveStatus status, bool ray) {
    Result r;
    r.status = status;
    r.xc = xc_;
    r.sc = sc_;
    r.xf = xf_;
    r.y = y_;
    r.tau = tau_;
    r.kappa = kappa_;
    r.ray = ray;
    return r;
  };

  int iter = 0;
  for (; iter <= st_.max_iterations; ++iter) {
    // Residuals.
    const VectorXd Atc = P_.Ac.transpose() * y_;
    rp_ = tau_ * P_.b - P_.Ac * xc_;
    if (nf) rp_ -= P_.Af * xf_;
    rdc_ = tau_ * P_.cc - Atc - sc_;
    rdf_ = nf ? VectorXd(tau_ * P_.cf - P_.Af.transpose() * y_) : VectorXd();
    const double cx = P_.cc.dot(xc_) + (nf ? P_.cf.dot(xf_) : 0.0);
    const double by = P_.b.dot(y_);
    rg_ = kappa_ + cx - by;
    const double mu = (xc_.dot(sc_) + tau_ * kappa_) / (P_.nu + 1);

    const double pres = rp_.norm() / tau_ / (1.0 + bnorm);
    const double dres =
        std::sqrt(rdc_.squaredNorm() + (nf ? rdf_.squaredNorm() : 0.0)) / tau_ /
        (1.0 + cnorm);
    const double pobj = cx / tau_, dobj = by / tau_;
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (st_.verbosity > 0) {
      std::fprintf(stderr,
                   "%3d pobj %+.8e dobj %+.8e pres %.2e dres %.2e gap %.2e "
                   "tau %.2e kap %.2e mu %.2e\n",
                   iter, pobj + P_.offset, dobj + P_.offset, pres, dres, gap,
                   tau_, kappa_, mu);
    }
    if (pres <= st_.feas_tol && dres <= st_.feas_tol && gap <= st_.gap_tol) {
      res = snapshot(SolveStatus::optimal, false);
      break;
    }
    const double metric = std::max({pres, dres, gap});
    if (metric < best_metric) {
      best_metric = metric;
      best = snapshot(metric <= st_.near_tol ? SolveStatus::near_optimal
                                             : SolveStatus::numerical_failure,
                      false);
      best_iter = iter;
    }
    // Once the residuals stop improving, further iterations only amplify
    // round-off in the Schur solve.
    if (best.status == SolveStatus::near_optimal && iter - best_iter >= 10) {
      res = best;
      res.message = "no further progress";
      break;
    }
    // Infeasibility certificates.
    if (by > 0.0) {
      const double dr = std::sqrt((Atc + sc_).squaredNorm() +
                                  (nf ? (P_.Af.transpose() * y_).squaredNorm() : 0.0));
      if (dr <= st_.feas_tol * by * std::max(1.0, cnorm) && tau_ < kappa_) {
        res = snapshot(SolveStatus::infeasible, true);
        break;
      }
    }
    if (cx < 0.0) {
      VectorXd Ax = P_.Ac * xc_;
      if (nf) Ax += P_.Af * xf_;
      if (Ax.norm() <= st_.feas_tol * (-cx) * std::max(1.0, bnorm) && tau_ < kappa_) {
        res = snapshot(SolveStatus::unbounded, true);
        break;
      }
    }
    if (iter == st_.max_iterations) {
      res = best;
      res.message = "iteration limit";
      break;
    }

    if (!factor_iterate() || !factor_kkt()) {
      res = best;
      res.message = "factorization failed";
      break;
    }
    // Constant-in-sigma part of the direction: K w = [b + Ac H c; cf].
    Hc_ = apply_H(P_.cc);
    solve_kkt(P_.b + P_.Ac * Hc_, P_.cf, w_y_, w_f_);

    // Predictor.
    Direction pred = direction(0.0, 1.0, nullptr);
    double amax = std::min(max_step(xc_, pred.dxc, cholX_), max_step(sc_, pred.dsc, cholS_));
    if (pred.dtau < 0) amax = std::min(amax, -tau_ / pred.dtau);
    if (pred.dkappa < 0) amax = std::min(amax, -kappa_ / pred.dkappa);
    const double aa = std::min(1.0, amax);
    const double mu_aff =
        ((xc_ + aa * pred.dxc).dot(sc_ + aa * pred.dsc) +
         (tau_ + aa * pred.dtau) * (kappa_ + aa * pred.dkappa)) / (P_.nu + 1);
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    Direction d = direction(sigma * mu, 1.0 - sigma, &pred);
    amax = std::min(max_step(xc_, d.dxc, cholX_), max_step(sc_, d.dsc, cholS_));
    if (d.dtau < 0) amax = std::min(amax, -tau_ / d.dtau);
    if (d.dkappa < 0) amax = std::min(amax, -kappa_ / d.dkappa);
    const double alpha = std::min(1.0, 0.99 * amax);
    if (!std::isfinite(alpha) || !std::isfinite(d.dtau)) {
      res = best;
      res.message = "non-finite step";
      break;
    }
    xc_ += alpha * d.dxc;
    sc_ += alpha * d.dsc;
    if (nf) xf_ += alpha * d.dxf;
    y_ += alpha * d.dy;
    tau_ += alpha * d.dtau;
    kappa_ += alpha * d.dkappa;
    stalls = alpha < 1e-6 ? stalls + 1 : 0;
    if (stalls >= 5) {
      res = best;
      res.message = "step length stalled";
      ++iter;
      break;
    }
    // Rescale the homogeneous iterate if tau and kappa drift large.
    const double scale = std::max(tau_, kappa_);
    if (scale > 1e6) {
      xc_ /= scale; sc_ /= scale; xf_ /= scale; y_ /= scale;
      tau_ /= scale; kappa_ /= scale;
    }
  }
  res.iterations = std::min(iter, st_.max_iterations);
  res.schur_seconds = schur_seconds_;
  res.factor_seconds = factor_seconds_;
  if (res.xc.size() == 0) {
    // No iterate was recorded (failure at iteration 0).
    res = snapshot(SolveStatus::numerical_failure, false);
    res.message = "no usable iterate";
  }
  return res;
}

struct Presolved {
  Reduced red;
  std::vector<int> row_map;       // program row -> reduced row or -1
  std::vector<int> kept_rows;     // reduced row -> program row
  std::vector<int> elim_rows;     // rows touching only free variables
  std::vector<int> free_cols;     // kept free columns (program ids)
  std::vector<int> cone_cols;     // cone vector position -> program col
  MatrixXd N;                     // free = xp + N u
  VectorXd xp;
  MatrixXd Arf;                   // elim rows x free cols (unscaled)
  int dropped_cols = 0;
  std::optional<SolveStatus> decided;  // presolve settled the status
  VectorXd cert_x, cert_y;             // certificate for `decided`
};

Presolved presolve(const ConicProgram& prog) {
  Presolved ps;
  const int m = prog.num_rows;
  const int n = prog.num_vars();
  const auto offsets = prog.cone_offsets();
  std::vector<ConeType> col_type(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < prog.cones.size(); ++k) {
    for (int v = 0; v < prog.cones[k].num_vars(); ++v) {
      col_type[offsets[k] + v] = prog.cones[k].type;
    }
  }
  std::vector<int> col_nnz(static_cast<std::size_t>(n), 0);
  std::vector<int> row_nnz(static_cast<std::size_t>(m), 0);
  std::vector<char> row_cone(static_cast<std::size_t>(m), 0);
  for (std::size_t t = 0; t < prog.A.nnz(); ++t) {
    if (prog.A.vals[t] == 0.0) continue;
    ++col_nnz[prog.A.cols[t]];
    ++row_nnz[prog.A.rows[t]];
    if (col_type[prog.A.cols[t]] != ConeType::free) row_cone[prog.A.rows[t]] = 1;
  }
  // Free columns without entries.
  std::vector<int> free_index(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j) {
    if (col_type[j] != ConeType::free) continue;
    if (col_nnz[j] == 0) {
      if (prog.c[j] != 0.0) {
        ps.decided = SolveStatus::unbounded;
        ps.cert_x = VectorXd::Zero(n);
        ps.cert_x[j] = prog.c[j] > 0 ? -1.0 : 1.0;
        return ps;
      }
      ++ps.dropped_cols;
      continue;
    }
    free_index[j] = static_cast<int>(ps.free_cols.size());
    ps.free_cols.push_back(j);
  }
  // Row classification.
  ps.row_map.assign(static_cast<std::size_t>(m), -1);
  std::vector<int> elim_index(static_cast<std::size_t>(m), -1);
  for (int r = 0; r < m; ++r) {
    if (row_nnz[r] == 0) {
      if (prog.b[r] != 0.0) {
        ps.decided = SolveStatus::infeasible;
        ps.cert_y = VectorXd::Zero(m);
        ps.cert_y[r] = prog.b[r] > 0 ? 1.0 : -1.0;
        return ps;
      }
      continue;
    }
    if (row_cone[r]) {
      ps.row_map[r] = static_cast<int>(ps.kept_rows.size());
      ps.kept_rows.push_back(r);
    } else {
      elim_index[r] = static_cast<int>(ps.elim_rows.size());
      ps.elim_rows.push_back(r);
    }
  }
  const int mo = static_cast<int>(ps.kept_rows.size());
  const int nfree = static_cast<int>(ps.free_cols.size());
  MatrixXd Aof = MatrixXd::Zero(mo, nfree);
  ps.Arf = MatrixXd::Zero(static_cast<Eigen::Index>(ps.elim_rows.size()), nfree);
  VectorXd bo(mo), br(static_cast<Eigen::Index>(ps.elim_rows.size()));
  for (int i = 0; i < mo; ++i) bo[i] = prog.b[ps.kept_rows[i]];
  for (std::size_t i = 0; i < ps.elim_rows.size(); ++i) br[i] = prog.b[ps.elim_rows[i]];

  Reduced& R = ps.red;
  R.m = mo;
  // Cone columns: nonneg first, then PSD cones in program order.
  std::vector<int> cone_pos(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < prog.cones.size(); ++k) {
    if (prog.cones[k].type != ConeType::nonneg) continue;
    for (int v = 0; v < prog.cones[k].size; ++v) {
      cone_pos[offsets[k] + v] = static_cast<int>(ps.cone_cols.size());
      ps.cone_cols.push_back(offsets[k] + v);
    }
  }
  R.nl = static_cast<int>(ps.cone_cols.size());
  for (std::size_t k = 0; k < prog.cones.size(); ++k) {
    if (prog.cones[k].type != ConeType::psd) continue;
    R.psd_n.push_back(prog.cones[k].size);
    R.psd_off.push_back(static_cast<Eigen::Index>(ps.cone_cols.size()));
    for (int v = 0; v < prog.cones[k].num_vars(); ++v) {
      cone_pos[offsets[k] + v] = static_cast<int>(ps.cone_cols.size());
      ps.cone_cols.push_back(offsets[k] + v);
    }
  }
  R.ncone = static_cast<Eigen::Index>(ps.cone_cols.size());
  R.nu = R.nl;
  for (int nk : R.psd_n) R.nu += nk;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(prog.A.nnz());
  for (std::size_t t = 0; t < prog.A.nnz(); ++t) {
    const int r = prog.A.rows[t], j = prog.A.cols[t];
    const double v = prog.A.vals[t];
    if (v == 0.0) continue;
    if (col_type[j] == ConeType::free) {
      if (free_index[j] < 0) continue;
      if (ps.row_map[r] >= 0) {
        Aof(ps.row_map[r], free_index[j]) += v;
      } else if (elim_index[r] >= 0) {
        ps.Arf(elim_index[r], free_index[j]) += v;
      }
    } else {
      trip.emplace_back(ps.row_map[r], cone_pos[j], v);
    }
  }
  SpMat Ac(mo, R.ncone);
  Ac.setFromTriplets(trip.begin(), trip.end());

  VectorXd cfree(nfree);
  for (int i = 0; i < nfree; ++i) cfree[i] = prog.c[ps.free_cols[i]];
  R.cc.resize(R.ncone);
  for (Eigen::Index i = 0; i < R.ncone; ++i) R.cc[i] = prog.c[ps.cone_cols[i]];

  // Rows touching only free variables: x_free = xp + N u.
  if (!ps.elim_rows.empty()) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(ps.Arf);
    ps.xp = cod.solve(br);
    const double err = (ps.Arf * ps.xp - br).norm();
    if (err > 1e-9 * (1.0 + br.norm())) {
      ps.decided = SolveStatus::infeasible;
      // Farkas vector: component of b_R outside range(Arf).
      VectorXd res = br - ps.Arf * ps.xp;
      ps.cert_y = VectorXd::Zero(m);
      for (std::size_t i = 0; i < ps.elim_rows.size(); ++i) {
        ps.cert_y[ps.elim_rows[i]] = res[static_cast<Eigen::Index>(i)];
      }
      return ps;
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(ps.Arf.transpose());
    qr.setThreshold(1e-12);
    const Eigen::Index rank = qr.rank();
    MatrixXd Q = qr.householderQ() * MatrixXd::Identity(nfree, nfree);
    ps.N = Q.rightCols(nfree - rank);
    R.Af = Aof * ps.N;
    bo -= Aof * ps.xp;
    R.cf = ps.N.transpose() * cfree;
    R.offset = cfree.dot(ps.xp);
  } else {
    ps.xp = VectorXd::Zero(nfree);
    R.Af = std::move(Aof);
    R.cf = cfree;
  }
  // Equilibrate rows.
  R.D = VectorXd::Ones(mo);
  VectorXd norms = VectorXd::Zero(mo);
  for (int r = 0; r < mo; ++r) {
    for (SpMat::InnerIterator it(Ac, r); it; ++it) norms[r] += it.value() * it.value();
  }
  if (R.Af.cols() > 0) norms += R.Af.rowwise().squaredNorm();
  for (int r = 0; r < mo; ++r) {
    if (norms[r] > 0.0) R.D[r] = 1.0 / std::sqrt(norms[r]);
  }
  R.Ac = R.D.asDiagonal() * Ac;
  if (R.Af.cols() > 0) R.Af = R.D.asDiagonal() * R.Af;
  R.b = R.D.cwiseProduct(bo);
  return ps;
}

}  // namespace

ConicSolution solve_conic(const ConicProgram& prog, const SolverSettings& settings) {
  prog.validate();
  settings.validate();
  const auto t0 = Clock::now();
  const int n = prog.num_vars();
  const int m = prog.num_rows;
  ConicSolution sol;
  Presolved ps = presolve(prog);
  sol.stats.presolve_eliminated_rows = static_cast<int>(ps.elim_rows.size());
  sol.stats.presolve_dropped_columns = ps.dropped_cols;
  sol.x.assign(static_cast<std::size_t>(n), 0.0);
  sol.y.assign(static_cast<std::size_t>(m), 0.0);
  sol.s.assign(static_cast<std::size_t>(n), 0.0);
  if (ps.decided) {
    sol.status = *ps.decided;
    if (ps.cert_x.size()) sol.x.assign(ps.cert_x.data(), ps.cert_x.data() + n);
    if (ps.cert_y.size()) sol.y.assign(ps.cert_y.data(), ps.cert_y.data() + m);
    sol.stats.message = "decided in presolve";
    sol.stats.seconds = seconds_since(t0);
    return sol;
  }

  SchurAssembler schur(prog, ps.row_map, ps.red.m);
  Ipm ipm(ps.red, schur, settings);
  auto r = ipm.run();
  sol.status = r.status;
  sol.stats.iterations = r.iterations;
  sol.stats.schur_seconds = r.schur_seconds;
  sol.stats.factor_seconds = r.factor_seconds;
  sol.stats.message = r.message;

  const Reduced& R = ps.red;
  const double inv = r.ray ? 1.0 : 1.0 / r.tau;
  // Primal.
  for (Eigen::Index i = 0; i < R.ncone; ++i) {
    sol.x[ps.cone_cols[i]] = r.xc[i] * inv;
    sol.s[ps.cone_cols[i]] = r.sc[i] * inv;
  }
  if (!ps.free_cols.empty()) {
    VectorXd u = r.xf * inv;
    VectorXd xfree = ps.elim_rows.empty() ? u : VectorXd(ps.N * u);
    if (!r.ray) xfree += ps.xp;
    for (std::size_t i = 0; i < ps.free_cols.size(); ++i) {
      sol.x[ps.free_cols[i]] = xfree[static_cast<Eigen::Index>(i)];
    }
  }
  // Dual: scaled rows map back through D.
  for (int i = 0; i < R.m; ++i) sol.y[ps.kept_rows[i]] = R.D[i] * r.y[i] * inv;
  if (!ps.elim_rows.empty() && !r.ray) {
    // A_Rf^T y_R = c_f - A_Of^T y_O on free columns.
    VectorXd rhs(static_cast<Eigen::Index>(ps.free_cols.size()));
    for (std::size_t i = 0; i < ps.free_cols.size(); ++i) rhs[i] = prog.c[ps.free_cols[i]];
    std::vector<int> free_index(static_cast<std::size_t>(n), -1);
    for (std::size_t i = 0; i < ps.free_cols.size(); ++i) free_index[ps.free_cols[i]] = static_cast<int>(i);
    for (std::size_t t = 0; t < prog.A.nnz(); ++t) {
      const int j = free_index[prog.A.cols[t]];
      const int r0 = ps.row_map[prog.A.rows[t]];
      if (j >= 0 && r0 >= 0) rhs[j] -= prog.A.vals[t] * sol.y[prog.A.rows[t]];
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(ps.Arf.transpose());
    const VectorXd yr = cod.solve(rhs);
    for (std::size_t i = 0; i < ps.elim_rows.size(); ++i) {
      sol.y[ps.elim_rows[i]] = yr[static_cast<Eigen::Index>(i)];
    }
  }

  // Residuals on the original program.
  VectorXd Ax = VectorXd::Zero(m), Aty = VectorXd::Zero(n);
  for (std::size_t t = 0; t < prog.A.nnz(); ++t) {
    Ax[prog.A.rows[t]] += prog.A.vals[t] * sol.x[prog.A.cols[t]];
    Aty[prog.A.cols[t]] += prog.A.vals[t] * sol.y[prog.A.rows[t]];
  }
  const Eigen::Map<const VectorXd> b(prog.b.data(), m), c(prog.c.data(), n),
      x(sol.x.data(), n), y(sol.y.data(), m), s(sol.s.data(), n);
  if (!r.ray) {
    sol.stats.primal_residual = (Ax - b).norm() / (1.0 + b.norm());
    sol.stats.dual_residual = (Aty + s - c).norm() / (1.0 + c.norm());
    sol.stats.primal_objective = c.dot(x) + prog.offset;
    sol.stats.dual_objective = b.dot(y) + prog.offset;
    sol.stats.relative_gap =
        std::abs(sol.stats.primal_objective - sol.stats.dual_objective) /
        (1.0 + std::abs(sol.stats.primal_objective) + std::abs(sol.stats.dual_objective));
    if (is_solved(sol.status)) sol.objective = sol.stats.primal_objective;
  }
  sol.stats.seconds = seconds_since(t0);
  return sol;
}

nlohmann::json to_json(const ConicSolution& sol) {
  nlohmann::json j{{"status", to_string(sol.status)},
                   {"x", sol.x},
                   {"y", sol.y},
                   {"s", sol.s},
                   {"stats",
                    {{"iterations", sol.stats.iterations},
                     {"primal_residual", sol.stats.primal_residual},
                     {"dual_residual", sol.stats.dual_residual},
                     {"relative_gap", sol.stats.relative_gap},
                     {"primal_objective", sol.stats.primal_objective},
                     {"dual_objective", sol.stats.dual_objective},
                     {"seconds", sol.stats.seconds},
                     {"message", sol.stats.message}}}};
  if (sol.objective) j["objective"] = *sol.objective;
  return j;
}

}  // namespace crashcert
