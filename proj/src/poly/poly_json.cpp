#include "crashcert/poly/poly_json.hpp"

#include <stdexcept>

namespace crashcert {

using nlohmann::json;

json to_json(const VariableSpace& s) {
  return json{{"n", s.n_states()},
              {"L", s.n_inputs()},
              {"t", s.has_time()},
              {"z", s.has_z()}};
}

VariableSpace space_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("vars: expected object");
  return VariableSpace(j.at("n").get<int>(), j.value("L", 0),
                       j.value("t", false), j.value("z", false));
}

json to_json(const Polynomial& p) {
  const int nv = p.space().size();
  json terms = json::array();
  for (const auto& [e, c] : p.terms()) {
    json ex = json::array();
    for (int i = 0; i < nv; ++i) ex.push_back(static_cast<int>(e[i]));
    terms.push_back(json{{"e", std::move(ex)}, {"c", c}});
  }
  return json{{"vars", to_json(p.space())}, {"terms", std::move(terms)}};
}

Polynomial polynomial_from_json(const json& j, const VariableSpace& space) {
  if (!j.is_object()) throw std::invalid_argument("polynomial: expected object");
  const VariableSpace s =
      j.contains("vars") ? space_from_json(j.at("vars")) : space;
  Polynomial p(s);
  const auto& terms = j.at("terms");
  if (!terms.is_array()) throw std::invalid_argument("terms: expected array");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    const auto& ex = t.at("e");
    if (!ex.is_array() || static_cast<int>(ex.size()) != s.size()) {
      throw std::invalid_argument("terms/" + std::to_string(k) +
                                  "/e: expected " + std::to_string(s.size()) +
                                  " exponents");
    }
    Exponent e;
    for (int i = 0; i < s.size(); ++i) {
      const int v = ex[static_cast<std::size_t>(i)].get<int>();
      if (v < 0 || v > 255) {
        throw std::invalid_argument("terms/" + std::to_string(k) +
                                    "/e: exponent out of range");
      }
      e[i] = static_cast<std::uint8_t>(v);
    }
    p.add_term(e, t.at("c").get<double>());
  }
  return p;
}

Polynomial polynomial_from_json(const json& j) {
  if (!j.is_object() || !j.contains("vars")) {
    throw std::invalid_argument("polynomial: missing \"vars\"");
  }
  return polynomial_from_json(j, space_from_json(j.at("vars")));
}

}  // namespace crashcert
