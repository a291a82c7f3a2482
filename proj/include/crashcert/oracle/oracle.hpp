#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crashcert/programs/crash_problem.hpp"

namespace crashcert {

/// Piecewise-constant input on a uniform grid of segments over [0, horizon];
/// row k of `values` is the input on segment k.
struct ControlSignal {
  double horizon = 0.0;
  Eigen::MatrixXd values;

  int segments() const { return static_cast<int>(values.rows()); }
  double segment_length() const { return horizon / segments(); }
  int segment_index(double t) const;
  Eigen::VectorXd at(double t) const;
  /// Constant input w on `segments` segments.
  static ControlSignal constant(double horizon, int segments, const Eigen::VectorXd& w);
};

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  /// Set when the state left the escape box and integration stopped.
  bool truncated = false;
};

/// Fixed-step RK4 with the input held constant on each segment. `step` must
/// divide the segment length. When escape_lo/escape_hi are given, integration
/// stops (truncated = true) once the state leaves that box.
Trajectory simulate(const Dynamics& dyn, const Eigen::VectorXd& x0,
                    const ControlSignal& signal, double step,
                    const Eigen::VectorXd& escape_lo = {},
                    const Eigen::VectorXd& escape_hi = {});

/// Feasible point of the crash problem: an admissible input steering x0 into
/// Xu at time t_stop while staying in X.
struct CrashWitness {
  Eigen::VectorXd x0;
  ControlSignal signal;
  double t_stop = 0.0;
  /// Max over segments active before t_stop of the input cost.
  double peak_cost = 0.0;
  Eigen::VectorXd terminal;
  double min_distance = 0.0;
  Trajectory trajectory;
};

struct UpperBoundOptions {
  int segments = 50;
  int restarts = 4;
  std::uint64_t seed = 0;
  /// RK4 steps per segment.
  int substeps = 10;
  /// Objective evaluations per restart and budget.
  int max_evaluations = 2000;
  /// Bisection stops when the bracket on z is this narrow.
  double tolerance = 1e-3;
};

/// Smallest peak budget z in [0, J_max] for which the search finds a crash,
/// with the witness; std::nullopt when none is found at J_max.
std::optional<CrashWitness> crash_upper_bound(const CrashProblem& pb,
                                              const UpperBoundOptions& opt = {});

/// Search at one fixed budget z (exposed for monotonicity checks).
std::optional<CrashWitness> crash_search_at(const CrashProblem& pb, double z,
                                            const UpperBoundOptions& opt = {});

/// Euclidean distance from x to the state set S; exact projection when S is
/// an intersection of balls, halfspaces and coordinate slabs, dense sampling
/// of the box [lo, hi] otherwise.
class SetDistance {
 public:
  SetDistance(const BasicSemialgebraicSet& S, const Eigen::VectorXd& lo,
              const Eigen::VectorXd& hi);
  double operator()(const Eigen::VectorXd& x) const;
  bool exact() const { return exact_; }

 private:
  /// kind 0: a.x <= b; kind 1: |x - c|^2 <= r_sq; kind 2: lo <= x_i <= hi.
  struct Primitive {
    int kind = 0;
    Eigen::VectorXd a;
    double b = 0.0;
    int coord = 0;
    double lo = 0.0;
    double hi = 0.0;
  };
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;

  std::vector<Primitive> prims_;
  bool exact_ = true;
  std::vector<Eigen::VectorXd> cloud_;
};

/// Minimum distance to Xu over the simulated trajectory (step 1e-3).
double trajectory_distance(const CrashProblem& pb, const Eigen::VectorXd& x0,
                           const ControlSignal& signal, double step = 1e-3);

nlohmann::json to_json(const CrashWitness& w);
/// CSV with header t,x1..xn.
void write_trajectory_csv(std::ostream& out, const Trajectory& tr);

}  // namespace crashcert
