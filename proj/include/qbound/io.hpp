#pragma once

// JSON serialization: matrices as nested arrays of [re, im] pairs, ModelSpec.

#include <string>

#include <json.hpp>

#include "qbound/quantum_core.hpp"

namespace qbound {

using json = nlohmann::json;

json cmatrix_to_json(const CMatrix& m);
CMatrix cmatrix_from_json(const json& j);
json rmatrix_to_json(const RMatrix& m);
/// Accepts either plain real rows or [re, im] pairs with zero imaginary parts.
RMatrix rmatrix_from_json(const json& j);
json rvector_to_json(const RVector& v);
RVector rvector_from_json(const json& j);

/// ModelSpec: {"family", "dim", and for affine_custom "rho0", "basis",
/// optional "domain": {"kind": "ball", "radius"} | {"kind": "box", "lower", "upper"}}.
/// Unknown keys are rejected.
ParametricModel model_from_json(const json& spec);
json model_to_json(const ParametricModel& model);

/// Builtin family by tag; `dim` only matters for pure_dim_d.
ParametricModel builtin_model(const std::string& tag, int dim = 3);

json read_json_file(const std::string& path);

}  // namespace qbound
