#include "qbound/io.hpp"

#include <fstream>
#include <set>

namespace qbound {

json cmatrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

CMatrix cmatrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InputError("matrix must be a nested array");
  const auto n = static_cast<Eigen::Index>(j.size());
  const auto m = static_cast<Eigen::Index>(j[0].size());
  CMatrix out(n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m)
      throw InputError("matrix rows have inconsistent length");
    for (Eigen::Index c = 0; c < m; ++c) {
      const auto& e = row[static_cast<std::size_t>(c)];
      if (e.is_number()) {
        out(r, c) = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        out(r, c) = cplx(e[0].get<double>(), e[1].get<double>());
      } else {
        throw InputError("matrix entry must be a number or an [re, im] pair");
      }
    }
  }
  return out;
}

json rmatrix_to_json(const RMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

RMatrix rmatrix_from_json(const json& j) {
  CMatrix c = cmatrix_from_json(j);
  if (c.imag().cwiseAbs().maxCoeff() > 0.0) throw InputError("expected a real matrix");
  return c.real();
}

json rvector_to_json(const RVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

RVector rvector_from_json(const json& j) {
  if (!j.is_array()) throw InputError("expected a numeric array");
  RVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError("expected a numeric array");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

ParametricModel builtin_model(const std::string& tag, int dim) {
  switch (parse_family(tag)) {
    case Family::bloch_full: return bloch_full();
    case Family::bloch_equatorial: return bloch_equatorial();
    case Family::pure_qubit: return pure_state(2);
    case Family::pure_dim_d: return pure_state(dim);
    case Family::affine_custom: break;
  }
  throw InputError("affine_custom needs a JSON model spec");
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InputError(std::string("unknown key '") + it.key() + "' in " + what);
}

Domain domain_from_json(const json& j, int p) {
  if (!j.is_object()) throw InputError("domain must be an object");
  reject_unknown_keys(j, {"kind", "radius", "lower", "upper"}, "domain");
  const std::string kind = j.value("kind", "ball");
  if (kind == "ball") return Domain::ball(j.value("radius", 1.0));
  if (kind == "box") {
    Domain d = Domain::box(rvector_from_json(j.at("lower")), rvector_from_json(j.at("upper")));
    if (d.lower.size() != p) throw InputError("box domain dimension mismatch");
    return d;
  }
  throw InputError("unknown domain kind '" + kind + "'");
}

json domain_to_json(const Domain& d) {
  if (d.kind == Domain::Kind::ball) return {{"kind", "ball"}, {"radius", d.radius}};
  return {{"kind", "box"}, {"lower", rvector_to_json(d.lower)}, {"upper", rvector_to_json(d.upper)}};
}

}  // namespace

ParametricModel model_from_json(const json& spec) {
  try {
    if (!spec.is_object()) throw InputError("model spec must be a JSON object");
    reject_unknown_keys(spec, {"family", "dim", "rho0", "basis", "domain"}, "model spec");
    const Family family = parse_family(spec.at("family").get<std::string>());
    const int dim = spec.value("dim", family == Family::pure_dim_d ? 3 : 2);
    if (family != Family::affine_custom) {
      if (spec.contains("rho0") || spec.contains("basis") || spec.contains("domain"))
        throw InputError("rho0/basis/domain are only valid for affine_custom");
      if ((family == Family::bloch_full || family == Family::bloch_equatorial ||
           family == Family::pure_qubit) && dim != 2)
        throw InputError(to_string(family) + " requires dim 2");
      return builtin_model(to_string(family), dim);
    }
    const CMatrix rho0 = cmatrix_from_json(spec.at("rho0"));
    if (rho0.rows() != dim) throw DimensionError("rho0 dimension differs from dim");
    std::vector<CMatrix> basis;
    for (const auto& b : spec.at("basis")) basis.push_back(cmatrix_from_json(b));
    const int p = static_cast<int>(basis.size());
    Domain domain = spec.contains("domain") ? domain_from_json(spec.at("domain"), p) : Domain::ball(1.0);
    return affine_custom(rho0, basis, domain);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model spec: ") + e.what());
  }
}

json model_to_json(const ParametricModel& model) {
  json j = {{"family", to_string(model.family())}, {"dim", model.dim()}};
  if (model.family() == Family::affine_custom) {
    j["rho0"] = cmatrix_to_json(model.affine_offset());
    json b = json::array();
    for (const auto& m : model.affine_basis()) b.push_back(cmatrix_to_json(m));
    j["basis"] = b;
    j["domain"] = domain_to_json(model.domain());
  }
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("invalid JSON in '" + path + "': " + e.what());
  }
}

}  // namespace qbound
