#include "crashcert/datadriven/datadriven.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "crashcert/poly/poly_json.hpp"

namespace crashcert {

namespace {

VariableSpace dict_space(int n) { return VariableSpace(n, 0, true, false); }

std::vector<double> point_of(double t, const Eigen::VectorXd& x) {
  std::vector<double> p(static_cast<std::size_t>(x.size() + 1));
  p[0] = t;
  for (Eigen::Index i = 0; i < x.size(); ++i) p[static_cast<std::size_t>(i + 1)] = x(i);
  return p;
}

void check_coords(const std::vector<int>& corrupted, int n) {
  if (corrupted.empty()) throw std::invalid_argument("empty corrupted-coordinate set");
  for (int c : corrupted) {
    if (c < 0 || c >= n) throw std::invalid_argument("corrupted coordinate out of range");
  }
}

}  // namespace

std::vector<int> Dictionary::mask(int l) const {
  std::vector<int> out;
  const auto& fl = f.at(static_cast<std::size_t>(l));
  for (int i = 0; i < n(); ++i) {
    if (!fl[static_cast<std::size_t>(i)].is_zero()) out.push_back(i);
  }
  return out;
}

Dictionary monomial_dictionary(int n, int max_deg, const std::vector<int>& corrupted) {
  if (n < 1 || max_deg < 1) throw std::invalid_argument("dictionary: need n >= 1, max_deg >= 1");
  check_coords(corrupted, n);
  const VariableSpace s = dict_space(n);
  Dictionary d;
  d.f0.assign(static_cast<std::size_t>(n), Polynomial(s));
  std::vector<int> xs;
  for (int i = 0; i < n; ++i) xs.push_back(s.x(i));
  for (int c : corrupted) {
    for (const auto& e : monomials_up_to(xs, max_deg)) {
      std::vector<Polynomial> fl(static_cast<std::size_t>(n), Polynomial(s));
      fl[static_cast<std::size_t>(c)] = Polynomial::monomial(s, e);
      d.f.push_back(std::move(fl));
    }
  }
  return d;
}

PolytopeModel assemble_gamma_h(const Dictionary& dict, const std::vector<DataRecord>& data,
                               const std::vector<int>& corrupted) {
  if (data.empty()) throw std::invalid_argument("no data records");
  const int n = dict.n();
  check_coords(corrupted, n);
  for (const auto& fl : dict.f) {
    if (static_cast<int>(fl.size()) != n) throw std::invalid_argument("dictionary dimension mismatch");
  }
  const int L = dict.size();
  const auto rows = static_cast<Eigen::Index>(data.size() * corrupted.size());
  PolytopeModel m;
  m.gamma.resize(rows, L);
  m.h.resize(rows);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& rec = data[k];
    if (rec.x.size() != n || rec.y.size() != n) {
      throw std::invalid_argument("record " + std::to_string(k) + ": dimension mismatch");
    }
    const auto pt = point_of(rec.t, rec.x);
    for (int c : corrupted) {
      const auto ci = static_cast<std::size_t>(c);
      for (int l = 0; l < L; ++l) {
        m.gamma(r, l) = dict.f[static_cast<std::size_t>(l)][ci].evaluate(pt);
      }
      m.h(r) = dict.f0[ci].evaluate(pt) - rec.y(c);
      m.provenance.emplace_back(static_cast<int>(k), c);
      ++r;
    }
  }
  return m;
}

std::vector<DataRecord> generate_synthetic_data(
    const std::vector<Polynomial>& truth, const BasicSemialgebraicSet& X,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double T, int count,
    double eps, const std::vector<int>& corrupted, std::uint64_t seed) {
  const int n = static_cast<int>(truth.size());
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
  if (count < 0) throw std::invalid_argument("negative record count");
  if (lo.size() != n || hi.size() != n) throw std::invalid_argument("box dimension mismatch");
  check_coords(corrupted, n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<DataRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    DataRecord rec;
    rec.x.resize(n);
    bool found = false;
    for (int attempt = 0; attempt < 1000000 && !found; ++attempt) {
      for (int i = 0; i < n; ++i) rec.x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
      std::vector<double> xs(rec.x.data(), rec.x.data() + n);
      found = X.contains(xs);
    }
    if (!found) throw std::runtime_error("rejection sampling failed after 10^6 draws");
    rec.t = T * unit(rng);
    const auto pt = point_of(rec.t, rec.x);
    rec.y.resize(n);
    for (int i = 0; i < n; ++i) rec.y(i) = truth[static_cast<std::size_t>(i)].evaluate(pt);
    for (int c : corrupted) rec.y(c) += eps * (2.0 * unit(rng) - 1.0);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_data_csv(std::ostream& out, const std::vector<DataRecord>& data) {
  const int n = data.empty() ? 0 : static_cast<int>(data.front().x.size());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= n; ++i) out << ",y" << i;
  out << "\n" << std::setprecision(17);
  for (const auto& r : data) {
    out << r.t;
    for (int i = 0; i < n; ++i) out << "," << r.x(i);
    for (int i = 0; i < n; ++i) out << "," << r.y(i);
    out << "\n";
  }
}

std::vector<DataRecord> read_data_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("data CSV: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header.size() % 2 == 0 || header[0] != "t") {
    throw std::invalid_argument("data CSV: header must be t,x1..xn,y1..yn");
  }
  const int n = static_cast<int>((header.size() - 1) / 2);
  for (int i = 0; i < n; ++i) {
    if (header[static_cast<std::size_t>(1 + i)] != "x" + std::to_string(i + 1) ||
        header[static_cast<std::size_t>(1 + n + i)] != "y" + std::to_string(i + 1)) {
      throw std::invalid_argument("data CSV: header must be t,x1..xn,y1..yn");
    }
  }
  std::vector<DataRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw std::invalid_argument("data CSV line " + std::to_string(lineno) +
                                    ": bad number \"" + cell + "\"");
      }
    }
    if (vals.size() != header.size()) {
      throw std::invalid_argument("data CSV line " + std::to_string(lineno) +
                                  ": expected " + std::to_string(header.size()) + " fields");
    }
    DataRecord r;
    r.t = vals[0];
    r.x = Eigen::Map<Eigen::VectorXd>(vals.data() + 1, n);
    r.y = Eigen::Map<Eigen::VectorXd>(vals.data() + 1 + n, n);
    out.push_back(std::move(r));
  }
  return out;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << "\n";
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) +
                                    ": bad number \"" + cell + "\"");
      }
    }
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) +
                                  ": ragged row");
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::invalid_argument("matrix CSV: no rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

nlohmann::json to_json(const Dictionary& d) {
  nlohmann::json j;
  j["n"] = d.n();
  j["f0"] = nlohmann::json::array();
  for (const auto& p : d.f0) j["f0"].push_back(to_json(p));
  j["basis"] = nlohmann::json::array();
  for (int l = 0; l < d.size(); ++l) {
    nlohmann::json b;
    b["f"] = nlohmann::json::array();
    for (const auto& p : d.f[static_cast<std::size_t>(l)]) b["f"].push_back(to_json(p));
    b["mask"] = d.mask(l);
    j["basis"].push_back(b);
  }
  return j;
}

Dictionary dictionary_from_json(const nlohmann::json& j) {
  const int n = j.at("n").get<int>();
  if (n < 1) throw std::invalid_argument("dictionary: n must be >= 1");
  const VariableSpace s = dict_space(n);
  Dictionary d;
  const auto& f0 = j.at("f0");
  if (static_cast<int>(f0.size()) != n) throw std::invalid_argument("dictionary: f0 needs n entries");
  for (const auto& p : f0) d.f0.push_back(polynomial_from_json(p, s));
  for (const auto& b : j.at("basis")) {
    std::vector<Polynomial> fl;
    for (const auto& p : b.at("f")) fl.push_back(polynomial_from_json(p, s));
    if (static_cast<int>(fl.size()) != n) {
      throw std::invalid_argument("dictionary: basis entry needs n components");
    }
    d.f.push_back(std::move(fl));
    if (b.contains("mask") && b.at("mask").get<std::vector<int>>() != d.mask(d.size() - 1)) {
      throw std::invalid_argument("dictionary: mask disagrees with the nonzero components");
    }
  }
  if (d.f.empty()) throw std::invalid_argument("dictionary: L must be >= 1");
  return d;
}

CrashProblem data_driven_problem(const CrashProblem& base, const Dictionary& dict,
                                 const PolytopeModel& model) {
  CrashProblem pb = base;
  pb.dynamics.f0 = dict.f0;
  pb.dynamics.f = dict.f;
  pb.cost = PolytopeCost::from_gamma_h(model.gamma, model.h);
  pb.validate();
  return pb;
}

DataDrivenSetup flow_data_driven(int count, double eps, std::uint64_t seed) {
  CrashProblem base = preset_problem("halfcircle");
  base.name = "flow-data";
  const double origin[] = {0.0, 0.0};
  base.X = ball_set(origin, 8.0);
  const double r = std::sqrt(8.0);
  base.x_lo = Eigen::Vector2d(-r, -r);
  base.x_hi = Eigen::Vector2d(r, r);
  base.J_max = 1.0;
  base.Q_max = 4.0;

  DataDrivenSetup s;
  const std::vector<int> corrupted{1};
  s.dictionary = monomial_dictionary(2, 3, corrupted);
  const VariableSpace sp = dict_space(2);
  s.dictionary.f0[0] = Polynomial::variable(sp, sp.x(1));
  const Dynamics truth = flow_dynamics();
  s.data = generate_synthetic_data(truth.f0, base.X, base.x_lo, base.x_hi, base.T, count,
                                   eps, corrupted, seed);
  s.model = assemble_gamma_h(s.dictionary, s.data, corrupted);
  s.problem = data_driven_problem(base, s.dictionary, s.model);
  return s;
}

}  // namespace crashcert
