// Command-line front end: crash bounds, subvalue maps, data generation,
// minimal corruption, trajectory search and simulation.
//
// Exit codes: 0 success, 1 usage or input error, 2 solver failure.

#include <openssl/evp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crashcert/conic/solver.hpp"
#include "crashcert/datadriven/datadriven.hpp"
#include "crashcert/oracle/oracle.hpp"
#include "crashcert/programs/crash_programs.hpp"
#include "crashcert/programs/subvalue.hpp"

using namespace crashcert;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "crashcert 0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a temporary file in the target directory, then renames it.
void atomic_write(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed: " + path);
  }
  std::filesystem::rename(tmp, target);
}

// Collects outputs of one invocation and writes the manifest beside the
// first output.
class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, std::uint64_t seed)
      : command_(std::move(command)), argv_(std::move(argv)), seed_(seed),
        start_(std::chrono::steady_clock::now()) {}

  json config;
  json results = json::object();

  void write(const std::string& path, const std::string& content) {
    atomic_write(path, content);
    outputs_.push_back({path, sha256_hex(content)});
  }

  void finish() const {
    if (outputs_.empty()) return;
    json m;
    m["command"] = command_;
    m["argv"] = argv_;
    m["seed"] = seed_;
    m["config"] = config;
    m["version"] = kVersion;
    m["compiler"] = __VERSION__;
    m["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    m["results"] = results;
    json outs = json::array();
    for (const auto& [p, d] : outputs_) outs.push_back({{"path", p}, {"sha256", d}});
    m["outputs"] = outs;
    atomic_write(outputs_.front().first + ".manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

std::pair<int, int> parse_degrees(const std::string& s) {
  int a = 0, b = 0;
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      a = b = std::stoi(s);
    } else {
      a = std::stoi(s.substr(0, dots));
      b = std::stoi(s.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw UsageError("bad degree range \"" + s + "\" (expected D or a..b)");
  }
  if (a < 1 || b < a) throw UsageError("degrees must satisfy 1 <= a <= b, got \"" + s + "\"");
  return {a, b};
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": \"" + cell + "\"");
    }
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string dump_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

struct ProblemArgs {
  std::string file;
  std::string preset;

  void add(CLI::App* app) {
    auto* f = app->add_option("--problem", file, "Problem specification (JSON)");
    auto* p = app->add_option("--preset", preset, "Built-in problem name");
    f->excludes(p);
  }

  CrashProblem load() const {
    if (file.empty() == preset.empty()) throw UsageError("give exactly one of --problem, --preset");
    if (!preset.empty()) return preset_problem(preset);
    json j;
    try {
      j = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(file + ": " + e.what());
    }
    return crash_problem_from_json(j);
  }
};

SolveStatus worst(SolveStatus a, SolveStatus b) { return is_solved(a) ? b : a; }

// ---------------------------------------------------------------- commands

int cmd_crash_bound(Run& run, const CrashProblem& pb, const std::string& degrees, bool standard,
                    const std::string& out) {
  const auto [lo, hi] = parse_degrees(degrees);
  const LieForm form = standard ? LieForm::standard : LieForm::robust;
  const SolverSettings settings = settings_from_env();
  run.config = {{"problem", to_json(pb)},
                {"degrees", {lo, hi}},
                {"form", to_string(form)},
                {"solver", {{"gap_tol", settings.gap_tol}, {"feas_tol", settings.feas_tol},
                            {"max_iterations", settings.max_iterations}}}};
  json reports = json::array();
  SolveStatus status = SolveStatus::optimal;
  double prev = -std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (int d = lo; d <= hi; ++d) {
    const BoundReport r = crash_bound(pb, d, form, settings);
    status = worst(status, r.status);
    if (r.bound) {
      monotone = monotone && *r.bound >= prev - 1e-5;
      prev = *r.bound;
    }
    std::cout << "d=" << d << " bound=" << (r.bound ? dump_double(*r.bound) : "none")
              << " status=" << to_string(r.status) << " seconds=" << r.seconds << std::endl;
    reports.push_back(to_json(r));
  }
  json doc = {{"problem", pb.name}, {"form", to_string(form)}, {"reports", reports},
              {"monotone", monotone}};
  run.results = {{"monotone", monotone}, {"status", to_string(status)}};
  run.write(out, doc.dump(2) + "\n");
  return is_solved(status) ? 0 : 2;
}

int cmd_subvalue(Run& run, const CrashProblem& pb, const std::string& degrees,
                 const std::string& measure, const std::string& grid, const std::string& lo_s,
                 const std::string& hi_s, bool standard, const std::string& out,
                 const std::string& report) {
  auto [dlo, dhi] = parse_degrees(degrees);
  if (degrees.find("..") == std::string::npos) dlo = 1;
  if (pb.n() != 2) throw UsageError("subvalue maps need a two-state problem");
  int W = 0, H = 0;
  {
    const auto x = grid.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument("");
      W = std::stoi(grid.substr(0, x));
      H = std::stoi(grid.substr(x + 1));
    } catch (const std::exception&) {
      throw UsageError("bad grid \"" + grid + "\" (expected WxH)");
    }
    if (W < 1 || H < 1) throw UsageError("grid dimensions must be positive");
  }
  Eigen::VectorXd lo = pb.x_lo, hi = pb.x_hi;
  if (!lo_s.empty()) lo = to_vector(parse_list(lo_s, "--lo"));
  if (!hi_s.empty()) hi = to_vector(parse_list(hi_s, "--hi"));
  if (lo.size() != 2 || hi.size() != 2) throw UsageError("--lo/--hi need two values");
  for (int i = 0; i < 2; ++i) {
    if (lo(i) < pb.x_lo(i) - 1e-12 || hi(i) > pb.x_hi(i) + 1e-12 || lo(i) > hi(i)) {
      throw UsageError("grid must lie within the bounding box of X");
    }
  }
  const LieForm form = standard ? LieForm::standard : LieForm::robust;
  const SolverSettings settings = settings_from_env();
  const MomentVector phi = problem_measure(pb, measure, 2 * dhi);
  run.config = {{"problem", to_json(pb)},   {"degrees", {dlo, dhi}}, {"measure", measure},
                {"grid", {W, H}},           {"lo", {lo(0), lo(1)}},  {"hi", {hi(0), hi(1)}},
                {"form", to_string(form)}};

  SubvalueModel model;
  model.Xu = pb.Xu;
  model.J_max = pb.J_max;
  model.Q_max = pb.Q_max;
  json reports = json::array();
  json objectives = json::array(), lebesgue = json::array();
  SolveStatus status = SolveStatus::optimal;
  for (int d = dlo; d <= dhi; ++d) {
    const BoundReport r = subvalue_bound(pb, d, phi, form, settings);
    status = worst(status, r.status);
    if (r.q) model.q.push_back(*r.q);
    objectives.push_back(r.bound ? json(*r.bound) : json(nullptr));
    lebesgue.push_back(r.objective_lebesgue ? json(*r.objective_lebesgue) : json(nullptr));
    std::cout << "d=" << d << " objective=" << (r.bound ? dump_double(*r.bound) : "none")
              << " lebesgue=" << (r.objective_lebesgue ? dump_double(*r.objective_lebesgue) : "none")
              << " status=" << to_string(r.status) << std::endl;
    reports.push_back(to_json(r));
  }

  std::ostringstream csv;
  csv << "x1,x2,q_raw,q_clamped\n";
  for (int r = 0; r < H; ++r) {
    const double x2 = H == 1 ? lo(1) : lo(1) + (hi(1) - lo(1)) * r / (H - 1);
    for (int c = 0; c < W; ++c) {
      const double x1 = W == 1 ? lo(0) : lo(0) + (hi(0) - lo(0)) * c / (W - 1);
      const std::vector<double> x{x1, x2};
      csv << dump_double(x1) << "," << dump_double(x2) << "," << dump_double(model.evaluate(x))
          << "," << dump_double(model.clamped(x)) << "\n";
    }
  }
  run.write(out, csv.str());
  const json doc = {{"problem", pb.name}, {"measure", measure}, {"objectives", objectives},
                    {"objectives_lebesgue", lebesgue}, {"reports", reports}};
  if (!report.empty()) run.write(report, doc.dump(2) + "\n");
  run.results = {{"objectives", objectives}, {"objectives_lebesgue", lebesgue},
                 {"status", to_string(status)}};
  return is_solved(status) ? 0 : 2;
}

int cmd_datagen(Run& run, int count, double eps, std::uint64_t seed, const std::string& out,
                const std::string& gamma_out, const std::string& h_out,
                const std::string& problem_out, const std::string& dict_out) {
  if (count < 1) throw UsageError("--count must be >= 1");
  if (!(eps >= 0.0)) throw UsageError("--eps must be nonnegative");
  const DataDrivenSetup s = flow_data_driven(count, eps, seed);
  run.config = {{"count", count}, {"eps", eps}, {"seed", seed}, {"system", "flow"},
                {"dictionary", "cubic monomials on x2"}};
  std::ostringstream data;
  write_data_csv(data, s.data);
  run.write(out, data.str());
  if (!gamma_out.empty()) {
    std::ostringstream g;
    write_matrix_csv(g, s.model.gamma);
    run.write(gamma_out, g.str());
  }
  if (!h_out.empty()) {
    std::ostringstream h;
    write_matrix_csv(h, s.model.h);
    run.write(h_out, h.str());
  }
  if (!problem_out.empty()) run.write(problem_out, to_json(s.problem).dump(2) + "\n");
  if (!dict_out.empty()) run.write(dict_out, to_json(s.dictionary).dump(2) + "\n");
  run.results = {{"rows", s.model.gamma.rows()}, {"inputs", s.model.gamma.cols()}};
  return 0;
}

Dictionary default_flow_dictionary() {
  Dictionary d = monomial_dictionary(2, 3, {1});
  const VariableSpace s(2, 0, true, false);
  d.f0[0] = Polynomial::variable(s, s.x(1));
  return d;
}

int cmd_min_corruption(Run& run, const std::string& data_path, const std::string& dict_path,
                       const std::string& gamma_path, const std::string& h_path, double J_max,
                       const std::string& out) {
  Eigen::MatrixXd gamma;
  Eigen::VectorXd h;
  if (!data_path.empty()) {
    if (!gamma_path.empty() || !h_path.empty()) throw UsageError("--data excludes --gamma/--h-vector");
    std::istringstream in(read_file(data_path));
    const auto data = read_data_csv(in);
    const Dictionary dict =
        dict_path.empty() ? default_flow_dictionary()
                          : dictionary_from_json(json::parse(read_file(dict_path)));
    std::vector<int> coords;
    for (int l = 0; l < dict.size(); ++l) {
      for (int c : dict.mask(l)) {
        if (std::find(coords.begin(), coords.end(), c) == coords.end()) coords.push_back(c);
      }
    }
    std::sort(coords.begin(), coords.end());
    const auto m = assemble_gamma_h(dict, data, coords);
    gamma = m.gamma;
    h = m.h;
  } else {
    if (gamma_path.empty() || h_path.empty()) throw UsageError("give --data or both --gamma and --h-vector");
    std::istringstream gin(read_file(gamma_path)), hin(read_file(h_path));
    gamma = read_matrix_csv(gin);
    const Eigen::MatrixXd hm = read_matrix_csv(hin);
    if (hm.cols() != 1) throw std::invalid_argument(h_path + ": expected one column");
    h = hm.col(0);
  }
  run.config = {{"data", data_path}, {"dictionary", dict_path}, {"gamma", gamma_path},
                {"h", h_path}, {"J_max", J_max}};
  const CorruptionResult r = min_corruption(gamma, h, J_max, settings_from_env());
  json doc = {{"status", to_string(r.status)}, {"rows", gamma.rows()}, {"inputs", gamma.cols()}};
  doc["z"] = r.z ? json(*r.z) : json(nullptr);
  if (r.z) doc["w"] = std::vector<double>(r.w.data(), r.w.data() + r.w.size());
  std::cout << "status=" << to_string(r.status) << " z=" << (r.z ? dump_double(*r.z) : "none")
            << std::endl;
  run.results = doc;
  run.write(out, doc.dump(2) + "\n");
  if (r.status == SolveStatus::infeasible || is_solved(r.status)) return 0;
  return 2;
}

int cmd_upper_bound(Run& run, const CrashProblem& pb, const UpperBoundOptions& opt,
                    const std::string& out, const std::string& traj) {
  run.config = {{"problem", to_json(pb)}, {"segments", opt.segments},
                {"restarts", opt.restarts}, {"substeps", opt.substeps},
                {"max_evaluations", opt.max_evaluations}, {"tolerance", opt.tolerance},
                {"seed", opt.seed}};
  const auto w = crash_upper_bound(pb, opt);
  json doc;
  if (w) {
    doc = to_json(*w);
    doc["found"] = true;
    std::cout << "upper_bound=" << dump_double(w->peak_cost) << " t_stop=" << w->t_stop
              << std::endl;
  } else {
    doc = {{"found", false}, {"upper_bound", "inf"}};
    std::cout << "no crash found within J_max=" << pb.J_max << std::endl;
  }
  run.results = {{"found", w.has_value()}};
  if (w) run.results["peak_cost"] = w->peak_cost;
  run.write(out, doc.dump(2) + "\n");
  if (w && !traj.empty()) {
    std::ostringstream csv;
    write_trajectory_csv(csv, w->trajectory);
    run.write(traj, csv.str());
  }
  return 0;
}

int cmd_simulate(Run& run, const CrashProblem& pb, const std::string& x0_s,
                 const std::string& input_s, const std::string& signal_path, int segments,
                 double step, const std::string& out) {
  Eigen::VectorXd x0;
  if (!x0_s.empty()) {
    x0 = to_vector(parse_list(x0_s, "--x0"));
  } else if (auto p = pb.initial_point()) {
    x0 = *p;
  } else {
    throw UsageError("--x0 is required when X0 is not a single point");
  }
  if (x0.size() != pb.n()) throw UsageError("--x0 needs " + std::to_string(pb.n()) + " values");
  ControlSignal signal;
  if (!signal_path.empty()) {
    if (!input_s.empty()) throw UsageError("--signal excludes --input");
    const json j = json::parse(read_file(signal_path));
    const auto rows = j.at("segments").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw std::invalid_argument(signal_path + ": no segments");
    signal.horizon = j.at("horizon").get<double>();
    signal.values.resize(static_cast<Eigen::Index>(rows.size()), pb.num_inputs());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<int>(rows[r].size()) != pb.num_inputs()) {
        throw std::invalid_argument(signal_path + ": segment width mismatch");
      }
      for (int l = 0; l < pb.num_inputs(); ++l) {
        signal.values(static_cast<Eigen::Index>(r), l) = rows[r][static_cast<std::size_t>(l)];
      }
    }
  } else {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(pb.num_inputs());
    if (!input_s.empty()) w = to_vector(parse_list(input_s, "--input"));
    if (w.size() != pb.num_inputs()) {
      throw UsageError("--input needs " + std::to_string(pb.num_inputs()) + " values");
    }
    if (segments < 1) throw UsageError("--segments must be >= 1");
    signal = ControlSignal::constant(pb.T, segments, w);
  }
  run.config = {{"problem", to_json(pb)}, {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                {"step", step}, {"signal_file", signal_path}, {"input", input_s},
                {"segments", signal.segments()}};
  const Eigen::VectorXd span = pb.x_hi - pb.x_lo;
  const Eigen::VectorXd mid = 0.5 * (pb.x_hi + pb.x_lo);
  const Trajectory tr = simulate(pb.dynamics, x0, signal, step, mid - 5.0 * span, mid + 5.0 * span);
  const double dist = trajectory_distance(pb, x0, signal, step);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr);
  run.results = {{"distance_to_unsafe", dist}, {"truncated", tr.truncated}};
  run.write(out, csv.str());
  std::cout << "distance_to_unsafe=" << dump_double(dist) << (tr.truncated ? " (truncated)" : "")
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified lower and numerical upper bounds on crash costs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  std::function<int()> action;
  const std::vector<std::string> args(argv, argv + argc);

  // crash-bound
  ProblemArgs cb_pb;
  std::string cb_degrees, cb_out;
  int cb_degree = -1;
  bool cb_standard = false, cb_robust = false;
  auto* cb = app.add_subcommand("crash-bound", "Lower bounds on the crash cost from X0");
  cb_pb.add(cb);
  auto* cb_d = cb->add_option("--degree", cb_degree, "Relaxation degree");
  auto* cb_ds = cb->add_option("--degrees", cb_degrees, "Degree range a..b");
  cb_d->excludes(cb_ds);
  auto* cb_s = cb->add_flag("--standard", cb_standard, "Lie constraint over the explicit (w,z) set");
  cb->add_flag("--robust", cb_robust, "Lie constraint with multipliers (default)")->excludes(cb_s);
  cb->add_option("--out", cb_out, "Report JSON")->required();
  cb->callback([&] {
    action = [&] {
      std::string range = cb_degrees;
      if (cb_degree != -1) {
        if (cb_degree < 1) throw UsageError("--degree must be >= 1");
        range = std::to_string(cb_degree);
      }
      if (range.empty()) throw UsageError("give --degree or --degrees");
      Run run("crash-bound", args, seed);
      const int rc = cmd_crash_bound(run, cb_pb.load(), range, cb_standard, cb_out);
      run.finish();
      return rc;
    };
  });

  // subvalue
  ProblemArgs sv_pb;
  std::string sv_degrees, sv_measure = "box", sv_grid = "41x41", sv_lo, sv_hi, sv_out, sv_report;
  bool sv_standard = false;
  auto* sv = app.add_subcommand("subvalue", "Subvalue functions and their grid map");
  sv_pb.add(sv);
  sv->add_option("--degrees", sv_degrees, "Degrees 1..D (or D)")->required();
  sv->add_option("--measure", sv_measure, "box or ball")
      ->check(CLI::IsMember({"box", "ball"}))
      ->capture_default_str();
  sv->add_option("--grid", sv_grid, "Grid size WxH")->capture_default_str();
  sv->add_option("--lo", sv_lo, "Grid lower corner a,b (default: box of X)");
  sv->add_option("--hi", sv_hi, "Grid upper corner a,b (default: box of X)");
  sv->add_flag("--standard", sv_standard, "Lie constraint over the explicit (w,z) set");
  sv->add_option("--out", sv_out, "Grid CSV")->required();
  sv->add_option("--report", sv_report, "Report JSON");
  sv->callback([&] {
    action = [&] {
      Run run("subvalue", args, seed);
      const int rc = cmd_subvalue(run, sv_pb.load(), sv_degrees, sv_measure, sv_grid, sv_lo,
                                  sv_hi, sv_standard, sv_out, sv_report);
      run.finish();
      return rc;
    };
  });

  // datagen
  int dg_count = 40;
  double dg_eps = 0.5;
  std::string dg_out, dg_gamma, dg_h, dg_problem, dg_dict;
  auto* dg = app.add_subcommand("datagen", "Synthetic Flow data with bounded noise on x2'");
  dg->add_option("--count", dg_count, "Number of records")->capture_default_str();
  dg->add_option("--eps", dg_eps, "Noise bound")->capture_default_str();
  dg->add_option("--out", dg_out, "Data CSV")->required();
  dg->add_option("--gamma-out", dg_gamma, "Gamma CSV");
  dg->add_option("--h-out", dg_h, "h CSV");
  dg->add_option("--problem-out", dg_problem, "Data-driven crash problem JSON");
  dg->add_option("--dictionary-out", dg_dict, "Dictionary JSON");
  dg->callback([&] {
    action = [&] {
      Run run("datagen", args, seed);
      const int rc =
          cmd_datagen(run, dg_count, dg_eps, seed, dg_out, dg_gamma, dg_h, dg_problem, dg_dict);
      run.finish();
      return rc;
    };
  });

  // min-corruption
  std::string mc_data, mc_dict, mc_gamma, mc_h, mc_out;
  double mc_jmax = 1.0;
  auto* mc = app.add_subcommand("min-corruption", "Least L-infinity corruption explaining data");
  mc->add_option("--data", mc_data, "Data CSV");
  mc->add_option("--dictionary", mc_dict, "Dictionary JSON (default: Flow, cubic on x2)");
  mc->add_option("--gamma", mc_gamma, "Gamma CSV");
  mc->add_option("--h-vector", mc_h, "h CSV");
  mc->add_option("--jmax", mc_jmax, "Cap on z")->capture_default_str();
  mc->add_option("--out", mc_out, "Result JSON")->required();
  mc->callback([&] {
    action = [&] {
      Run run("min-corruption", args, seed);
      const int rc = cmd_min_corruption(run, mc_data, mc_dict, mc_gamma, mc_h, mc_jmax, mc_out);
      run.finish();
      return rc;
    };
  });

  // upper-bound
  ProblemArgs ub_pb;
  UpperBoundOptions ub_opt;
  std::string ub_out, ub_traj;
  auto* ub = app.add_subcommand("upper-bound", "Trajectory search for a crash witness");
  ub_pb.add(ub);
  ub->add_option("--segments", ub_opt.segments, "Piecewise-constant segments")->capture_default_str();
  ub->add_option("--restarts", ub_opt.restarts, "Multistart count")->capture_default_str();
  ub->add_option("--substeps", ub_opt.substeps, "RK4 steps per segment")->capture_default_str();
  ub->add_option("--evaluations", ub_opt.max_evaluations, "Evaluations per restart")
      ->capture_default_str();
  ub->add_option("--tolerance", ub_opt.tolerance, "Bisection tolerance on z")->capture_default_str();
  ub->add_option("--out", ub_out, "Witness JSON")->required();
  ub->add_option("--trajectory", ub_traj, "Witness trajectory CSV");
  ub->callback([&] {
    action = [&] {
      Run run("upper-bound", args, seed);
      ub_opt.seed = seed;
      const int rc = cmd_upper_bound(run, ub_pb.load(), ub_opt, ub_out, ub_traj);
      run.finish();
      return rc;
    };
  });

  // simulate
  ProblemArgs sm_pb;
  std::string sm_x0, sm_input, sm_signal, sm_out;
  int sm_segments = 50;
  double sm_step = 1e-3;
  auto* sm = app.add_subcommand("simulate", "Simulate a trajectory under a given input");
  sm_pb.add(sm);
  sm->add_option("--x0", sm_x0, "Initial state a,b,... (default: the point X0)");
  sm->add_option("--input", sm_input, "Constant input w1,...");
  sm->add_option("--signal", sm_signal, "Witness JSON with segment inputs");
  sm->add_option("--segments", sm_segments, "Segments for a constant input")->capture_default_str();
  sm->add_option("--step", sm_step, "RK4 step")->capture_default_str();
  sm->add_option("--out", sm_out, "Trajectory CSV")->required();
  sm->callback([&] {
    action = [&] {
      Run run("simulate", args, seed);
      const int rc =
          cmd_simulate(run, sm_pb.load(), sm_x0, sm_input, sm_signal, sm_segments, sm_step, sm_out);
      run.finish();
      return rc;
    };
  });

  // preset
  std::string ps_name, ps_out;
  bool ps_list = false;
  auto* ps = app.add_subcommand("preset", "Write a built-in problem as JSON");
  ps->add_flag("--list", ps_list, "List the built-in problems");
  ps->add_option("--name", ps_name, "Problem name");
  ps->add_option("--out", ps_out, "Problem JSON");
  ps->callback([&] {
    action = [&] {
      if (ps_list) {
        for (const auto& n : preset_names()) std::cout << n << "\n";
        return 0;
      }
      if (ps_name.empty() || ps_out.empty()) throw UsageError("give --name and --out (or --list)");
      Run run("preset", args, seed);
      run.config = {{"name", ps_name}};
      run.write(ps_out, to_json(preset_problem(ps_name)).dump(2) + "\n");
      run.finish();
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
