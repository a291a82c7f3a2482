#include "crashcert/conic/program.hpp"

#include <stdexcept>

namespace crashcert {

using nlohmann::json;

int svec_index(int n, int i, int j) {
  if (i < j) std::swap(i, j);
  // Columns 0..j-1 hold n, n-1, ..., n-j+1 entries.
  return j * n - j * (j - 1) / 2 + (i - j);
}

int ConicProgram::num_vars() const {
  int n = 0;
  for (const auto& k : cones) n += k.num_vars();
  return n;
}

std::vector<int> ConicProgram::cone_offsets() const {
  std::vector<int> off;
  off.reserve(cones.size());
  int n = 0;
  for (const auto& k : cones) {
    off.push_back(n);
    n += k.num_vars();
  }
  return off;
}

void ConicProgram::validate() const {
  const int n = num_vars();
  if (static_cast<int>(c.size()) != n) {
    throw std::invalid_argument("c has " + std::to_string(c.size()) +
                                " entries, cones hold " + std::to_string(n));
  }
  if (static_cast<int>(b.size()) != num_rows) {
    throw std::invalid_argument("b has " + std::to_string(b.size()) +
                                " entries, expected " + std::to_string(num_rows));
  }
  if (A.rows.size() != A.vals.size() || A.cols.size() != A.vals.size()) {
    throw std::invalid_argument("A triplet arrays differ in length");
  }
  for (std::size_t k = 0; k < A.vals.size(); ++k) {
    if (A.rows[k] < 0 || A.rows[k] >= num_rows || A.cols[k] < 0 ||
        A.cols[k] >= n) {
      throw std::invalid_argument("A entry " + std::to_string(k) +
                                  " out of range");
    }
  }
  for (const auto& k : cones) {
    if (k.size < 0) throw std::invalid_argument("negative cone size");
  }
}

namespace {

const char* cone_name(ConeType t) {
  switch (t) {
    case ConeType::free: return "free";
    case ConeType::nonneg: return "nonneg";
    case ConeType::psd: return "psd";
  }
  return "free";
}

ConeType cone_from_name(const std::string& s) {
  if (s == "free") return ConeType::free;
  if (s == "nonneg") return ConeType::nonneg;
  if (s == "psd") return ConeType::psd;
  throw std::invalid_argument("unknown cone type \"" + s + "\"");
}

}  // namespace

json to_json(const ConicProgram& p) {
  json cones = json::array();
  for (const auto& k : p.cones) {
    cones.push_back(json{{"type", cone_name(k.type)}, {"size", k.size}});
  }
  return json{{"format", "crashcert-conic-1"},
              {"sense", "min"},
              {"svec", "lower-colmajor-sqrt2"},
              {"num_rows", p.num_rows},
              {"c", p.c},
              {"offset", p.offset},
              {"A", {{"rows", p.A.rows}, {"cols", p.A.cols}, {"vals", p.A.vals}}},
              {"b", p.b},
              {"cones", std::move(cones)}};
}

ConicProgram conic_program_from_json(const json& j) {
  ConicProgram p;
  p.c = j.at("c").get<std::vector<double>>();
  p.b = j.at("b").get<std::vector<double>>();
  p.num_rows = j.value("num_rows", static_cast<int>(p.b.size()));
  p.offset = j.value("offset", 0.0);
  const auto& a = j.at("A");
  p.A.rows = a.at("rows").get<std::vector<int>>();
  p.A.cols = a.at("cols").get<std::vector<int>>();
  p.A.vals = a.at("vals").get<std::vector<double>>();
  for (const auto& k : j.at("cones")) {
    p.cones.push_back({cone_from_name(k.at("type").get<std::string>()),
                       k.at("size").get<int>()});
  }
  p.validate();
  return p;
}

}  // namespace crashcert
