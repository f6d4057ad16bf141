#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "qbound/io.hpp"
#include "qbound/linalg.hpp"
#include "qbound/simulate.hpp"

namespace qbound::cli {

namespace {

std::uint64_t default_seed() {
  if (const char* s = std::getenv("QBOUND_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw InputError(std::string("QBOUND_SEED is not an integer: ") + s);
    }
  }
  return 7;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not a number: '" + item + "'");
    }
  }
  return out;
}

RVector parse_theta(const std::string& s) {
  const auto v = parse_list(s);
  return Eigen::Map<const RVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct ModelArgs {
  std::string model;
  int dim = 3;

  void add(CLI::App* cmd) {
    cmd->add_option("--model", model, "builtin family tag or file:spec.json")->required();
    cmd->add_option("--dim", dim, "dimension for pure_dim_d");
  }

  ParametricModel build() const {
    if (model.rfind("file:", 0) == 0) return model_from_json(read_json_file(model.substr(5)));
    return builtin_model(model, dim);
  }
};

RVector theta_or_reference(const ParametricModel& m, const std::string& s) {
  if (s.empty()) return m.reference_point();
  RVector t = parse_theta(s);
  if (t.size() != m.num_params()) {
    std::ostringstream os;
    os << "theta has " << t.size() << " entries, the model has " << m.num_params() << " parameters";
    throw DimensionError(os.str());
  }
  return t;
}

RMatrix weight_matrix(const std::string& w, const ParametricModel& m, const RVector& theta) {
  if (w == "helstrom_quarter") return helstrom_quarter(m, theta);
  if (w == "identity") return RMatrix::Identity(m.num_params(), m.num_params());
  if (w.rfind("file:", 0) == 0) return rmatrix_from_json(read_json_file(w.substr(5)));
  throw InputError("unknown weight '" + w + "' (helstrom_quarter, identity or file:path)");
}

json diagnostics_json(const HolevoDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"starts", d.starts},
          {"final_smoothing", d.final_smoothing},
          {"constraint_residual", d.constraint_residual},
          {"smoothing_gap", d.smoothing_gap},
          {"multistart_spread", d.multistart_spread},
          {"helstrom_value", d.helstrom_value},
          {"initial_value", d.initial_value}};
}

void print(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

// ---- helstrom

struct HelstromCmd {
  ModelArgs model;
  std::string theta;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("helstrom", "Helstrom information matrix at theta");
    model.add(c);
    c->add_option("--theta", theta, "comma-separated parameter point")->required();
    c->callback([this] { ran = true; });
  }
  int exec(std::ostream& out) const {
    const auto m = model.build();
    const RVector t = theta_or_reference(m, theta);
    const RMatrix h = helstrom_matrix(m, t).values;
    Eigen::SelfAdjointEigenSolver<RMatrix> es(h);
    print(out, {{"theta", rvector_to_json(t)},
                {"H", rmatrix_to_json(h)},
                {"eigenvalues", rvector_to_json(es.eigenvalues())}});
    return ok;
  }
  bool ran = false;
};

// ---- holevo

struct HolevoCmd {
  ModelArgs model;
  std::string theta;
  std::string weight = "helstrom_quarter";
  std::string options_file;
  std::uint64_t seed = 0;
  int max_iters = HolevoOptions{}.max_iters;
  int multistart = HolevoOptions{}.multistart;
  bool with_x = false;
  bool ran = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("holevo", "Holevo bound, minimizer V0 and dual bound K0");
    model.add(c);
    c->add_option("--theta", theta, "comma-separated parameter point (default: origin)");
    c->add_option("--weight", weight, "helstrom_quarter | identity | file:path");
    c->add_option("--options", options_file, "solver options JSON file");
    c->add_option("--seed", seed, "solver seed (default: QBOUND_SEED or 7)");
    c->add_option("--max-iters", max_iters, "iterations per smoothing stage");
    c->add_option("--multistart", multistart, "random restarts besides the SLD start");
    c->add_flag("--with-x", with_x, "include the optimal X collection");
    c->callback([this] { ran = true; });
  }

  int exec(std::ostream& out, const CLI::App& app) const {
    const auto m = model.build();
    const RVector t = theta_or_reference(m, theta);
    const RMatrix g = weight_matrix(weight, m, t);
    HolevoOptions o = options_file.empty() ? HolevoOptions{} : HolevoOptions::from_json(read_json_file(options_file));
    const auto* sub = app.get_subcommand("holevo");
    o.seed = sub->count("--seed") ? seed : (options_file.empty() ? default_seed() : o.seed);
    if (sub->count("--max-iters")) o.max_iters = max_iters;
    if (sub->count("--multistart")) o.multistart = multistart;
    const auto problem = HolevoProblem::make(ModelPoint::at(m, t), g);
    const auto sol = solve_holevo(problem, o);
    json j = {{"model", model_to_json(m)},
              {"theta", rvector_to_json(t)},
              {"weight", rmatrix_to_json(g)},
              {"value", sol.value},
              {"V0", rmatrix_to_json(sol.v0)},
              {"Z", cmatrix_to_json(sol.z_star)},
              {"diagnostics", diagnostics_json(sol.diagnostics)},
              {"options", o.to_json()}};
    try {
      const auto dual = dual_bound(sol, g);
      j["K0"] = rmatrix_to_json(dual.k0);
      j["dual_value"] = dual.value;
    } catch (const NumericalError& e) {
      j["K0"] = nullptr;
      j["dual_error"] = e.what();
    }
    if (with_x) {
      json xs = json::array();
      for (const auto& x : sol.x_star) xs.push_back(cmatrix_to_json(x));
      j["X"] = xs;
    }
    print(out, j);
    return ok;
  }
};

// ---- bayes

struct BayesCmd {
  ModelArgs model;
  std::string prior = "bump:0.9";
  QuadOptions quad;
  bool ran = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("bayes", "Integrated Holevo bound E_pi C_G0 for the fidelity loss");
    model.add(c);
    c->add_option("--prior", prior, "bump:r0 | uniform:r0 | file:prior.json");
    c->add_option("--radial", quad.radial, "radial nodes at the coarsest level");
    c->add_option("--angular", quad.angular, "angular nodes at the coarsest level");
    c->add_option("--refinements", quad.refinements, "grid refinements");
    c->add_option("--mc-samples", quad.mc_samples, "Monte Carlo samples for p >= 4");
    c->add_option("--workers", quad.workers, "worker threads");
    c->callback([this] { ran = true; });
  }

  int exec(std::ostream& out) const {
    const auto m = model.build();
    const Prior pr = prior.rfind("file:", 0) == 0 ? prior_from_json(read_json_file(prior.substr(5)), m.num_params())
                                                  : prior_from_spec(prior, m.num_params());
    const auto b = integrated_holevo(m, LossSpec::fidelity(m), pr, quad);
    json j = b.to_json();
    j["model"] = model_to_json(m);
    j["prior"] = pr.to_json();
    j["loss"] = "fidelity";
    print(out, j);
    return ok;
  }
};

// ---- simulate

struct SimulateCmd {
  ModelArgs model;
  std::string scheme = "random-basis";
  std::string estimator = "mle";
  std::string n_copies = "1000";
  std::string prior = "bump:0.9";
  std::string format = "json";
  int trials = 200;
  int workers = 1;
  double first_fraction = 0.1;
  std::uint64_t seed = 0;
  bool ran = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "Monte Carlo Bayes fidelity risk of a separable scheme");
    model.add(c);
    c->add_option("--scheme", scheme, "fixed | alternating | random-basis | two-step");
    c->add_option("--estimator", estimator, "mle | bayes_mean");
    c->add_option("--n-copies", n_copies, "comma-separated list of N");
    c->add_option("--trials", trials, "trials per N");
    c->add_option("--workers", workers, "worker threads");
    c->add_option("--seed", seed, "seed (default: QBOUND_SEED or 7)");
    c->add_option("--prior", prior, "bump:r0 | file:prior.json");
    c->add_option("--first-fraction", first_fraction, "two-step first-stage fraction");
    c->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    c->callback([this] { ran = true; });
  }

  int exec(std::ostream& out, const CLI::App& app) const {
    const auto m = model.build();
    const Prior pr = prior.rfind("file:", 0) == 0 ? prior_from_json(read_json_file(prior.substr(5)), m.num_params())
                                                  : prior_from_spec(prior, m.num_params());
    const auto kind = parse_scheme(scheme);
    const auto sch = kind == SchemeKind::two_step_adaptive ? two_step_scheme(m, first_fraction)
                                                           : MeasurementScheme::standard(kind, m);
    const auto est_kind = parse_estimator(estimator);
    const auto est = make_estimator(est_kind, m, pr);
    const std::uint64_t s = app.get_subcommand("simulate")->count("--seed") ? seed : default_seed();
    std::vector<int> ns;
    for (double v : parse_list(n_copies)) {
      if (v < 1 || v != std::floor(v)) throw InputError("--n-copies entries must be positive integers");
      ns.push_back(static_cast<int>(v));
    }
    if (ns.empty()) throw InputError("--n-copies is empty");
    const double bound = integrated_holevo(m, LossSpec::fidelity(m), pr).value;
    json rows = json::array();
    std::ostringstream csv;
    csv << risk_csv_header() << '\n';
    for (int n : ns) {
      const auto r = bayes_risk_mc(m, pr, sch, est, n, trials, s, workers);
      json row = r.to_json();
      row["family"] = to_string(m.family());
      row["scheme"] = to_string(sch.kind);
      row["estimator"] = to_string(est_kind);
      row["bound"] = bound;
      row["slack"] = r.value - bound;
      rows.push_back(row);
      csv << risk_csv_row(to_string(m.family()), to_string(sch.kind), to_string(est_kind), r, bound) << '\n';
    }
    if (format == "csv")
      out << csv.str();
    else
      print(out, {{"seed", s}, {"prior", pr.to_json()}, {"rows", rows}});
    return ok;
  }
};

// ---- verify-paper

struct Row {
  std::string claim;
  double expected;
  double computed;
  double tol;
  bool pass;
};

Row closeness(std::string claim, double expected, double computed, double tol) {
  return {std::move(claim), expected, computed, tol, std::abs(computed - expected) <= tol};
}

std::vector<Row> closed_form_rows(std::uint64_t seed, double tol) {
  std::vector<Row> rows;
  HolevoOptions o;
  o.seed = seed;
  const auto full = bloch_full();
  for (double r : {0.0, 0.5, 0.8}) {
    RVector t(3);
    t << 0.0, 0.0, r;
    const double v = solve_holevo(full, t, helstrom_quarter(full, t), o).value;
    std::ostringstream name;
    name << "full-qubit C_{H/4} at r=" << r;
    const double expect = (3.0 + 2.0 * r) / 4.0;
    rows.push_back(closeness(name.str(), expect, v, tol * expect));
  }
  const auto eq = bloch_equatorial();
  RVector te(2);
  te << 0.3, -0.2;
  const auto eq_sol = solve_holevo(eq, te, helstrom_quarter(eq, te), o);
  rows.push_back(closeness("equatorial C_{H/4}", 0.5, eq_sol.value, tol * 0.5));
  for (int d : {2, 3}) {
    const auto pm = pure_state(d);
    RVector t = RVector::Constant(pm.num_params(), 0.2);
    const double v = solve_holevo(pm, t, helstrom_quarter(pm, t), o).value;
    rows.push_back(closeness("pure d=" + std::to_string(d) + " C_{H/4} = d-1", d - 1.0, v, tol * (d - 1.0)));
  }
  for (int d : {2, 3}) {
    const auto pm = pure_state(d);
    RVector t = RVector::Constant(pm.num_params(), 0.2);
    const RMatrix h = helstrom_matrix(pm, t).values;
    const RMatrix hinv = h.inverse();
    const auto info = empirical_fisher(pm, t, MeasurementScheme::random_basis(), 2000, seed);
    const auto [v, se] = info.functional([&](const RMatrix& i) { return (hinv * i).trace(); });
    rows.push_back(closeness("Gill-Massar equality, pure d=" + std::to_string(d) + " exhaustive", d - 1.0, v,
                             std::max(3.0 * se, 1e-9)));
  }
  {
    const auto dual = dual_bound(eq_sol, helstrom_quarter(eq, te));
    const double back = solve_holevo(eq, te, dual_weight(eq_sol, dual), o).value;
    rows.push_back(closeness("dual roundtrip equatorial", dual.value, back, 1e-5 * std::abs(dual.value)));
  }
  {
    const auto pr = Prior::bump(3);
    const auto b = integrated_holevo(full, LossSpec::fidelity(full), pr);
    rows.push_back(closeness("full-qubit E_pi C = (3+2E|theta|)/4, bump prior", (3.0 + 2.0 * b.mean_norm) / 4.0,
                             b.value, 2.0 * b.error_estimate));
  }
  {
    const auto pr = Prior::bump(2, 0.8);
    const auto b = integrated_holevo(eq, LossSpec::fidelity(eq), pr);
    rows.push_back(closeness("equatorial E_pi C = 1/2", 0.5, b.value, std::max(2.0 * b.error_estimate, tol * 0.5)));
  }
  return rows;
}

struct VerifyCmd {
  std::uint64_t seed = 0;
  double tol = 1e-3;
  std::string format = "table";
  bool ran = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("verify-paper", "Regression table of the closed-form values");
    c->add_option("--seed", seed, "seed (default: QBOUND_SEED or 7)");
    c->add_option("--tol", tol, "relative tolerance for closed-form Holevo values");
    c->add_option("--format", format, "table | json")->check(CLI::IsMember({"table", "json"}));
    c->callback([this] { ran = true; });
  }

  int exec(std::ostream& out, const CLI::App& app) const {
    const std::uint64_t s = app.get_subcommand("verify-paper")->count("--seed") ? seed : default_seed();
    const auto rows = closed_form_rows(s, tol);
    const bool all = std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.pass; });
    if (format == "json") {
      json j = json::array();
      for (const auto& r : rows)
        j.push_back({{"claim", r.claim}, {"expected", r.expected}, {"computed", r.computed}, {"tol", r.tol},
                     {"status", r.pass ? "PASS" : "FAIL"}});
      print(out, j);
    } else {
      out << std::left << std::setw(52) << "claim" << std::setw(16) << "expected" << std::setw(16) << "computed"
          << std::setw(12) << "tol" << "status\n";
      out << std::setprecision(10);
      for (const auto& r : rows)
        out << std::setw(52) << r.claim << std::setw(16) << r.expected << std::setw(16) << r.computed << std::setw(12)
            << std::setprecision(3) << r.tol << std::setprecision(10) << (r.pass ? "PASS" : "FAIL") << '\n';
    }
    return all ? ok : verification_failed;
  }
};

// ---- check-dual

struct CheckDualCmd {
  std::string solution;
  std::string info;
  double tol = 1e-7;
  bool ran = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("check-dual", "Check trace(K0 I) <= C^K0 for a saved holevo solution");
    c->add_option("--solution", solution, "JSON emitted by 'qbound holevo'")->required();
    c->add_option("--info", info, "information matrix JSON, or 'helstrom'")->required();
    c->add_option("--tol", tol, "tolerance on the inequality");
    c->callback([this] { ran = true; });
  }

  int exec(std::ostream& out) const {
    const json sol = read_json_file(solution);
    if (!sol.contains("K0") || sol.at("K0").is_null() || !sol.contains("dual_value"))
      throw InputError("solution file has no dual bound (K0, dual_value)");
    const RMatrix k = rmatrix_from_json(sol.at("K0"));
    const double c = sol.at("dual_value").get<double>();
    RMatrix i;
    if (info == "helstrom") {
      const auto m = model_from_json(sol.at("model"));
      i = helstrom_matrix(m, rvector_from_json(sol.at("theta"))).values;
    } else {
      const json ij = read_json_file(info);
      i = rmatrix_from_json(ij.is_object() ? ij.at("I") : ij);
    }
    if (i.rows() != k.rows() || i.cols() != k.cols()) throw DimensionError("information and K0 sizes differ");
    const auto r = check_dual(k, i, c, tol);
    print(out, {{"holds", r.holds}, {"slack", r.slack}, {"trace_KI", (k * i).trace()}, {"dual_value", c}});
    return ok;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Holevo, Helstrom and Bayesian bounds for qubit and qudit state estimation", "qbound"};
  app.require_subcommand(1);
  HelstromCmd helstrom;
  HolevoCmd holevo;
  BayesCmd bayes;
  SimulateCmd simulate;
  VerifyCmd verify;
  CheckDualCmd check;
  helstrom.add(app);
  holevo.add(app);
  bayes.add(app);
  simulate.add(app);
  verify.add(app);
  check.add(app);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return usage_error;
  }
  try {
    if (helstrom.ran) return helstrom.exec(out);
    if (holevo.ran) return holevo.exec(out, app);
    if (bayes.ran) return bayes.exec(out);
    if (simulate.ran) return simulate.exec(out, app);
    if (verify.ran) return verify.exec(out, app);
    if (check.ran) return check.exec(out);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return usage_error;
  } catch (const json::exception& e) {
    err << "input error: " << e.what() << '\n';
    return usage_error;
  } catch (const ConvergenceError& e) {
    err << "not converged: " << e.what() << '\n';
    print(out, {{"error", "not_converged"}, {"best_value", e.best_value()}});
    return not_converged;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return numerical_error;
  }
  return usage_error;
}

}  // namespace qbound::cli
