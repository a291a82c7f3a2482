#pragma once

#include <nlohmann/json.hpp>

#include "crashcert/poly/polynomial.hpp"

namespace crashcert {

/// {"n":2,"L":1,"t":true,"z":true}
nlohmann::json to_json(const VariableSpace& s);
VariableSpace space_from_json(const nlohmann::json& j);

/// {"vars":{...},"terms":[{"e":[...],"c":...}, ...]} with one exponent entry
/// per variable in (t, x1..xn, z, w1..wL) order. Terms appear in graded
/// order, so serialization is deterministic; doubles round-trip exactly.
nlohmann::json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);

/// Like polynomial_from_json, but the variable block may be omitted, in
/// which case `space` is used. Exponent vectors must match its size.
Polynomial polynomial_from_json(const nlohmann::json& j,
                                const VariableSpace& space);

}  // namespace crashcert
