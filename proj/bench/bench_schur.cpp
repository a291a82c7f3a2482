// Times the Schur-complement assembly of one interior-point iteration with
// the reference and the structured (OpenMP) kernels on a crash program.
//
//   bench_schur [preset] [degree] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <random>
#include <string>

#include "crashcert/conic/schur.hpp"
#include "crashcert/programs/crash_programs.hpp"

using namespace crashcert;

namespace {

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) B(i, j) = N(rng);
  }
  return B * B.transpose() / n + Eigen::MatrixXd::Identity(n, n);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string preset = argc > 1 ? argv[1] : "halfcircle";
  const int degree = argc > 2 ? std::atoi(argv[2]) : 3;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 3;
  if (degree < 1 || repeats < 1) {
    std::cerr << "usage: bench_schur [preset] [degree>=1] [repeats>=1]\n";
    return 1;
  }

  const CrashProblem pb = preset_problem(preset);
  const CrashProgram prog = build_robust_crash(pb, degree);
  AssemblyInfo info;
  const ConicProgram cp = prog.builder.assemble(&info);
  std::vector<int> row_map(static_cast<std::size_t>(cp.num_rows));
  std::iota(row_map.begin(), row_map.end(), 0);
  const SchurAssembler assembler(cp, row_map, cp.num_rows);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.5, 2.0);
  SchurWeights w;
  w.lin.resize(assembler.num_lin());
  for (Eigen::Index i = 0; i < w.lin.size(); ++i) w.lin(i) = U(rng);
  for (int k = 0; k < assembler.num_psd(); ++k) {
    w.X.push_back(random_spd(assembler.psd_order(k), rng));
    w.Sinv.push_back(random_spd(assembler.psd_order(k), rng));
  }

  Eigen::MatrixXd ref, fast;
  double t_ref = 1e300, t_fast = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    assembler.assemble(w, SchurKernel::reference, ref);
    t_ref = std::min(t_ref, seconds_since(t0));
    t0 = std::chrono::steady_clock::now();
    assembler.assemble(w, SchurKernel::structured, fast);
    t_fast = std::min(t_fast, seconds_since(t0));
  }
  const double diff = (ref - fast).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff());

  std::cout << "problem        " << preset << " (robust, d=" << degree << ")\n"
            << "rows           " << cp.num_rows << "\n"
            << "psd cones      " << assembler.num_psd() << " (" << assembler.num_structured()
            << " structured)\n"
            << "threads        " << omp_get_max_threads() << "\n"
            << "reference  [s] " << t_ref << "\n"
            << "structured [s] " << t_fast << "\n"
            << "speedup        " << t_ref / t_fast << "\n"
            << "max rel diff   " << diff << "\n";
  return diff < 1e-10 ? 0 : 2;
}
