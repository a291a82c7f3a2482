#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crashcert/poly/polynomial.hpp"
#include "crashcert/programs/crash_problem.hpp"
#include "crashcert/semialg/semialgebraic_set.hpp"

namespace crashcert {

/// One observation (t_k, x_k, y_k) with y_k a noisy value of x'(t_k).
struct DataRecord {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Dynamics model x' = f0(t,x) + sum_l w_l f_l(t,x); every polynomial lives
/// in VariableSpace(n, 0, /*t=*/true, /*z=*/false).
struct Dictionary {
  std::vector<Polynomial> f0;
  std::vector<std::vector<Polynomial>> f;

  int n() const { return static_cast<int>(f0.size()); }
  int size() const { return static_cast<int>(f.size()); }
  /// Coordinates (state equations) that basis function l enters.
  std::vector<int> mask(int l) const;
};

/// Rows Gamma_k = [f_1, ..., f_L](t_k, x_k) and h_k = f0(t_k, x_k) - y_k,
/// one row per (record, corrupted coordinate).
struct PolytopeModel {
  Eigen::MatrixXd gamma;
  Eigen::VectorXd h;
  /// (record index, coordinate) of every row.
  std::vector<std::pair<int, int>> provenance;
};

/// One basis function per monomial of the states up to max_deg (constant
/// included) per corrupted coordinate; f0 is zero.
Dictionary monomial_dictionary(int n, int max_deg, const std::vector<int>& corrupted);

PolytopeModel assemble_gamma_h(const Dictionary& dict,
                               const std::vector<DataRecord>& data,
                               const std::vector<int>& corrupted);

/// Draws N states uniformly from X (rejection from the box [lo, hi]), times
/// uniformly from [0, T], and y = truth(t, x) + eta with eta uniform in
/// [-eps, eps] on the corrupted coordinates. Deterministic in `seed`.
std::vector<DataRecord> generate_synthetic_data(
    const std::vector<Polynomial>& truth, const BasicSemialgebraicSet& X,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double T, int count,
    double eps, const std::vector<int>& corrupted, std::uint64_t seed);

/// CSV with header t,x1..xn,y1..yn. Values printed with 17 significant digits.
void write_data_csv(std::ostream& out, const std::vector<DataRecord>& data);
/// Throws std::invalid_argument naming the line of a malformed row.
std::vector<DataRecord> read_data_csv(std::istream& in);
/// Dense matrix CSV (no header).
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
/// Reads a dense CSV matrix; rows must have equal length.
Eigen::MatrixXd read_matrix_csv(std::istream& in);

/// {"n":..,"f0":[poly...],"basis":[{"f":[poly...],"mask":[i...]}...]}.
nlohmann::json to_json(const Dictionary& d);
Dictionary dictionary_from_json(const nlohmann::json& j);

/// Crash problem whose input set is the data-consistent polytope.
CrashProblem data_driven_problem(const CrashProblem& base, const Dictionary& dict,
                                 const PolytopeModel& model);

/// Flow example with known x1' = x2 and a cubic dictionary for x2', on the
/// ball |x|^2 <= 8 with the half-circle unsafe set, X0 = [1;0], T = 5,
/// J_max = 1, Q_max = 4. Data are generated from the true Flow field.
struct DataDrivenSetup {
  CrashProblem problem;
  Dictionary dictionary;
  std::vector<DataRecord> data;
  PolytopeModel model;
};
DataDrivenSetup flow_data_driven(int count, double eps, std::uint64_t seed);

}  // namespace crashcert
