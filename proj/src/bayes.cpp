#include "qbound/bayes.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "qbound/linalg.hpp"
#include "qbound/quadrature.hpp"

namespace qbound {

using nlohmann::json;

namespace {

double sphere_area(int p) {
  // Surface area of the unit sphere S^{p-1}.
  return 2.0 * std::pow(std::numbers::pi, 0.5 * p) / std::tgamma(0.5 * p);
}

}  // namespace

Prior Prior::radial(int p, double radius, Profile f, Profile df, std::string tag, json params) {
  if (p < 1) throw InputError("prior dimension must be positive");
  if (!(radius > 0.0)) throw InputError("prior radius must be positive");
  Prior pr;
  pr.dim_ = p;
  pr.radius_ = radius;
  pr.f_ = std::move(f);
  pr.df_ = std::move(df);
  pr.tag_ = std::move(tag);
  pr.params_ = std::move(params);
  const auto gl = gauss_legendre(96, 0.0, radius);
  double mass = 0.0;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k)
    mass += gl.weights[k] * pr.f_(gl.nodes[k]) * std::pow(gl.nodes[k], p - 1);
  mass *= sphere_area(p);
  if (!(mass > 0.0) || !std::isfinite(mass)) throw InputError("prior profile has no mass");
  pr.norm_ = mass;
  double mx = 0.0;
  for (int k = 0; k <= 4000; ++k) {
    const double r = radius * k / 4000.0;
    mx = std::max(mx, pr.f_(r) * std::pow(r, p - 1));
  }
  pr.radial_max_ = 1.05 * mx;
  return pr;
}

Prior Prior::bump(int p, double r0) {
  if (!(r0 > 0.0) || r0 >= 1.0) throw InputError("bump prior radius must lie in (0, 1)");
  auto f = [r0](double r) {
    const double u = 1.0 - (r / r0) * (r / r0);
    return u > 0.0 ? u * u : 0.0;
  };
  auto df = [r0](double r) {
    const double u = 1.0 - (r / r0) * (r / r0);
    return u > 0.0 ? -4.0 * u * r / (r0 * r0) : 0.0;
  };
  return radial(p, r0, f, df, "bump", {{"radius", r0}});
}

Prior Prior::uniform_ball(int p, double r0) {
  return radial(p, r0, [](double) { return 1.0; }, [](double) { return 0.0; }, "uniform",
                {{"radius", r0}});
}

json Prior::to_json() const {
  json j = params_;
  j["family"] = tag_;
  j["dim"] = dim_;
  j["support_radius"] = radius_;
  return j;
}

double Prior::density(const RVector& theta) const { return radial_density(theta.norm()); }

RVector Prior::density_gradient(const RVector& theta) const {
  const double r = theta.norm();
  if (r >= radius_ || r == 0.0) return RVector::Zero(theta.size());
  return (df_(r) / norm_ / r) * theta;
}

RVector Prior::log_density_gradient(const RVector& theta) const {
  const double d = density(theta);
  if (d <= 0.0) throw DomainError("log-density gradient outside the prior support");
  return density_gradient(theta) / d;
}

double Prior::radial_expectation(const std::function<double(double)>& h, int nodes) const {
  const auto gl = gauss_legendre(nodes, 0.0, radius_);
  double s = 0.0;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double r = gl.nodes[k];
    s += gl.weights[k] * h(r) * radial_density(r) * std::pow(r, dim_ - 1);
  }
  return s * sphere_area(dim_);
}

RVector Prior::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double r = 0.0;
  for (;;) {
    r = radius_ * unif(rng);
    if (unif(rng) * radial_max_ <= f_(r) * std::pow(r, dim_ - 1)) break;
  }
  RVector dir(dim_);
  double n = 0.0;
  while (n < 1e-12) {
    for (int i = 0; i < dim_; ++i) dir(i) = normal(rng);
    n = dir.norm();
  }
  return r * dir / n;
}

void Prior::check_invariants() const {
  const double mass = radial_expectation([](double) { return 1.0; }, 200);
  if (std::abs(mass - 1.0) > 1e-3) {
    std::ostringstream os;
    os << "prior integrates to " << mass << ", not 1";
    throw InputError(os.str());
  }
  const double edge = radial_density(radius_ * (1.0 - 1e-12));
  if (edge >= 1e-9) {
    std::ostringstream os;
    os << "prior density " << edge << " does not vanish on the support boundary";
    throw InputError(os.str());
  }
}

Prior prior_from_json(const json& j, int p) {
  if (!j.is_object()) throw InputError("prior must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "family" && it.key() != "radius" && it.key() != "base" && it.key() != "eps" &&
        it.key() != "delta" && it.key() != "dim" && it.key() != "support_radius")
      throw InputError("unknown prior key '" + it.key() + "'");
  try {
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "bump") return Prior::bump(p, j.value("radius", 0.9));
    if (fam == "uniform") return Prior::uniform_ball(p, j.value("radius", 1.0));
    if (fam == "tapered")
      return prior_taper(prior_from_json(j.at("base"), p), j.at("eps").get<double>(), j.at("delta").get<double>());
    throw InputError("unknown prior family '" + fam + "'");
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed prior: ") + e.what());
  }
}

Prior prior_from_spec(const std::string& spec, int p) {
  const auto colon = spec.find(':');
  const std::string fam = spec.substr(0, colon);
  json j = {{"family", fam}};
  if (colon != std::string::npos) {
    try {
      j["radius"] = std::stod(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw InputError("bad prior radius in '" + spec + "'");
    }
  }
  return prior_from_json(j, p);
}

Prior prior_taper(const Prior& base, double eps, double delta) {
  if (!(eps > 0.0)) throw InputError("taper eps must be positive");
  if (!(delta > 0.0)) throw InputError("taper delta must be positive (delta = 0 keeps a non-zero boundary density)");
  const double outer = base.radius() - delta;
  const double inner = base.radius() - 2.0 * delta;
  if (inner <= 0.0) throw InputError("taper delta too large for the base support");
  // Quintic smoothstep from 1 at `inner` to 0 at `outer`; vanishes to third order.
  auto cut = [inner, outer](double r) {
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    const double t = (r - inner) / (outer - inner);
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
  };
  auto dcut = [inner, outer](double r) {
    if (r <= inner || r >= outer) return 0.0;
    const double t = (r - inner) / (outer - inner);
    return -30.0 * t * t * (1.0 - t) * (1.0 - t) / (outer - inner);
  };
  const double retained = base.radial_expectation(cut, 256);
  if (retained * (1.0 + eps) < 1.0) {
    std::ostringstream os;
    os << "taper infeasible: cutting at radius " << outer << " keeps mass " << retained
       << ", so the renormalized prior would exceed (1+eps) times the base";
    throw InputError(os.str());
  }
  // base density up to its (unknown here) normalization: rebuild from radial_density.
  auto f = [base, cut](double r) { return base.radial_density(r) * cut(r); };
  auto df = [base, cut, dcut](double r) {
    const double h = 1e-7 * std::max(1.0, r);
    const double dbase = (base.radial_density(r + h) - base.radial_density(std::max(0.0, r - h))) /
                         (r + h - std::max(0.0, r - h));
    return dbase * cut(r) + base.radial_density(r) * dcut(r);
  };
  return Prior::radial(base.dim(), outer, f, df, "tapered",
                       {{"base", base.to_json()}, {"eps", eps}, {"delta", delta}});
}

RMatrix LossSpec::g0(const RVector& theta) const {
  const auto e = embed(theta);
  RMatrix g = e.jacobian.transpose() * g_tilde(theta) * e.jacobian;
  return 0.5 * (g + g.transpose());
}

LossSpec LossSpec::fidelity(const ParametricModel& model) {
  LossSpec l;
  l.tag = "fidelity";
  l.embed = [model](const RVector& theta) { return fidelity_embedding(model, theta); };
  const auto probe = fidelity_embedding(model, model.reference_point());
  const auto q = probe.psi.size();
  const double scale = probe.scale;
  l.g_tilde = [q, scale](const RVector&) { return RMatrix(scale * RMatrix::Identity(q, q)); };
  return l;
}

std::vector<std::vector<QuadNode>> quadrature_rays(const Prior& prior, const QuadOptions& q, int level) {
  const int p = prior.dim();
  const double big_r = prior.radius();
  const int scale = 1 << level;
  std::vector<std::vector<QuadNode>> rays;
  if (p >= 4) {
    // Monte Carlo from the prior itself: equal weights.
    const int m = q.mc_samples * scale;
    std::mt19937_64 rng(q.seed + static_cast<std::uint64_t>(level));
    for (int k = 0; k < m; ++k) rays.push_back({{prior.sample(rng), 1.0 / m}});
    return rays;
  }
  const auto rad = gauss_legendre(q.radial * scale, 0.0, big_r);
  std::vector<RVector> dirs;
  std::vector<double> dir_w;
  if (p == 1) {
    dirs = {RVector::Constant(1, 1.0), RVector::Constant(1, -1.0)};
    dir_w = {1.0, 1.0};
  } else if (p == 2) {
    const int na = q.angular * scale;
    for (int k = 0; k < na; ++k) {
      const double a = 2.0 * std::numbers::pi * (k + 0.5) / na;
      RVector d(2);
      d << std::cos(a), std::sin(a);
      dirs.push_back(d);
      dir_w.push_back(2.0 * std::numbers::pi / na);
    }
  } else {
    const int nphi = q.angular * scale;
    const auto cosq = gauss_legendre(std::max(2, nphi / 2), -1.0, 1.0);
    for (std::size_t c = 0; c < cosq.nodes.size(); ++c) {
      const double ct = cosq.nodes[c];
      const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      for (int k = 0; k < nphi; ++k) {
        const double a = 2.0 * std::numbers::pi * (k + 0.5) / nphi;
        RVector d(3);
        d << st * std::cos(a), st * std::sin(a), ct;
        dirs.push_back(d);
        dir_w.push_back(cosq.weights[c] * 2.0 * std::numbers::pi / nphi);
      }
    }
  }
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    std::vector<QuadNode> ray;
    for (std::size_t i = 0; i < rad.nodes.size(); ++i) {
      const double r = rad.nodes[i];
      const RVector theta = r * dirs[k];
      const double w = rad.weights[i] * std::pow(r, p - 1) * dir_w[k] * prior.density(theta);
      ray.push_back({theta, w});
    }
    rays.push_back(std::move(ray));
  }
  return rays;
}

namespace {

/// Runs `fn(ray_index)` over all rays on `workers` threads; rethrows the first
/// failure in ray order.
template <class Fn>
void for_each_ray(std::size_t n, int workers, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t start, std::size_t stride) {
    for (std::size_t k = start; k < n; k += stride) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1) {
    body(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) pool.emplace_back(body, t, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct LevelSum {
  double value = 0.0;
  double mean_norm = 0.0;
  double sq = 0.0;  // for Monte Carlo standard errors
  double solver_slack = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  int nodes = 0;
};

LevelSum integrate_level(const ParametricModel& model, const LossSpec& loss, const Prior& prior,
                         const QuadOptions& q, int level) {
  const auto rays = quadrature_rays(prior, q, level);
  std::vector<LevelSum> per(rays.size());
  for_each_ray(rays.size(), q.workers, [&](std::size_t k) {
    XCollection warm;
    LevelSum s;
    for (const auto& node : rays[k]) {
      const RMatrix g0 = loss.g0(node.theta);
      HolevoSolution sol;
      try {
        sol = solve_holevo(HolevoProblem::make(ModelPoint::at(model, node.theta), g0), q.solver,
                           warm.empty() ? nullptr : &warm);
      } catch (const Error& e) {
        std::ostringstream os;
        os << "Holevo solve failed at node theta = [" << node.theta.transpose() << "]: " << e.what();
        throw NumericalError(os.str());
      }
      warm = sol.x_star;
      s.value += node.weight * sol.value;
      s.sq += node.weight * sol.value * sol.value;
      s.mean_norm += node.weight * node.theta.norm();
      // f(x_eps) - C <= p sqrt(eps) bounds the per-node solver error.
      const double node_err = sol.x_star.size() * std::sqrt(sol.diagnostics.final_smoothing);
      s.solver_slack += node.weight * node_err;
      s.lo = std::min(s.lo, sol.value);
      s.hi = std::max(s.hi, sol.value);
      ++s.nodes;
    }
    per[k] = s;
  });
  LevelSum total;
  for (const auto& s : per) {
    total.value += s.value;
    total.sq += s.sq;
    total.mean_norm += s.mean_norm;
    total.solver_slack += s.solver_slack;
    total.lo = std::min(total.lo, s.lo);
    total.hi = std::max(total.hi, s.hi);
    total.nodes += s.nodes;
  }
  return total;
}

}  // namespace

json IntegratedBound::to_json() const {
  return {{"value", value},
          {"error_estimate", error_estimate},
          {"mean_norm", mean_norm},
          {"nodes", nodes},
          {"solver_failures", solver_failures},
          {"integrand_min", integrand_min},
          {"integrand_max", integrand_max}};
}

IntegratedBound integrated_holevo(const ParametricModel& model, const LossSpec& loss, const Prior& prior,
                                  const QuadOptions& q) {
  prior.check_invariants();
  if (prior.dim() != model.num_params()) throw DimensionError("prior and model dimensions differ");
  if (!model.domain().contains(model.reference_point()))
    throw InputError("model domain does not contain the prior support centre");
  const int levels = std::max(1, q.refinements + 1);
  IntegratedBound out;
  LevelSum prev, cur;
  for (int level = 0; level < levels; ++level) {
    prev = cur;
    cur = integrate_level(model, loss, prior, q, level);
    out.nodes += cur.nodes;
  }
  out.value = cur.value;
  out.mean_norm = cur.mean_norm;
  out.integrand_min = cur.lo;
  out.integrand_max = cur.hi;
  double disc;
  if (prior.dim() >= 4) {
    const double var = std::max(0.0, cur.sq - cur.value * cur.value);
    disc = std::sqrt(var / cur.nodes);
  } else {
    disc = levels > 1 ? std::abs(cur.value - prev.value) : std::abs(cur.value);
  }
  // Discretization, per-node solver slack, and a rounding floor.
  out.error_estimate = disc + cur.solver_slack + 64.0 * std::numeric_limits<double>::epsilon() * std::abs(cur.value);
  return out;
}

CFunction canonical_c(const ParametricModel& model, const LossSpec& loss, const HolevoOptions& opts) {
  return [model, loss, opts](const RVector& theta) {
    const RMatrix g0 = loss.g0(theta);
    const auto sol = solve_holevo(model, theta, g0, opts);
    const auto e = loss.embed(theta);
    return RMatrix(loss.g_tilde(theta) * e.jacobian * sol.v0);
  };
}

namespace {

struct VtTerms {
  double numerator = 0.0;
  double info = 0.0;
  double j = 0.0;
};

double derivative_step(const Prior& prior, const QuadOptions& q, int level) {
  return 0.25 * prior.radius() / (q.radial * (1 << level));
}

// (C pi)'_i = sum_j d/dtheta_j (C_ij pi), by central differences.
RVector divergence(const CFunction& c, const Prior& prior, const RVector& theta, double h, Eigen::Index q_dim) {
  const auto p = theta.size();
  RVector out = RVector::Zero(q_dim);
  for (Eigen::Index j = 0; j < p; ++j) {
    RVector tp = theta, tm = theta;
    tp(j) += h;
    tm(j) -= h;
    const double pp = prior.density(tp);
    const double pm = prior.density(tm);
    RVector col = RVector::Zero(q_dim);
    if (pp > 0.0) col += pp * c(tp).col(j);
    if (pm > 0.0) col -= pm * c(tm).col(j);
    out += col / (2.0 * h);
  }
  return out;
}

VtTerms van_trees_level(const Prior& prior, const LossSpec& loss, const CFunction& c, const InfoFunction* info,
                        const QuadOptions& q, int level, bool need_j) {
  const auto rays = quadrature_rays(prior, q, level);
  const double h = derivative_step(prior, q, level);
  std::vector<VtTerms> per(rays.size());
  for_each_ray(rays.size(), q.workers, [&](std::size_t k) {
    VtTerms t;
    for (const auto& node : rays[k]) {
      const double pi = prior.density(node.theta);
      if (pi <= 0.0 || node.weight == 0.0) continue;
      const RMatrix gt = loss.g_tilde(node.theta);
      const Eigen::LDLT<RMatrix> gt_inv(gt);
      const RMatrix cm = c(node.theta);
      if (info) {
        const auto e = loss.embed(node.theta);
        t.numerator += node.weight * (cm * e.jacobian.transpose()).trace();
        const RMatrix im = (*info)(node.theta);
        t.info += node.weight * gt_inv.solve(cm * im * cm.transpose()).trace();
      }
      if (need_j) {
        const RVector dv = divergence(c, prior, node.theta, h, cm.rows());
        t.j += node.weight * dv.dot(gt_inv.solve(dv)) / (pi * pi);
      }
    }
    per[k] = t;
  });
  VtTerms total;
  for (const auto& t : per) {
    total.numerator += t.numerator;
    total.info += t.info;
    total.j += t.j;
  }
  return total;
}

}  // namespace

VanTrees van_trees_rhs(const ParametricModel& model, const Prior& prior, const LossSpec& loss, const CFunction& c,
                       double n_copies, const InfoFunction& info, const QuadOptions& q) {
  if (prior.dim() != model.num_params()) throw DimensionError("prior and model dimensions differ");
  if (!(n_copies > 0.0)) throw InputError("N must be positive");
  const auto t = van_trees_level(prior, loss, c, &info, q, std::max(0, q.refinements), true);
  VanTrees out;
  out.numerator = t.numerator;
  out.info_term = t.info;
  out.j_term = t.j;
  const double denom = t.info + t.j / n_copies;
  if (!(std::abs(denom) > 1e-300)) {
    std::ostringstream os;
    os << "van Trees denominator vanishes (information term " << t.info << ", J term " << t.j << ")";
    throw NumericalError(os.str());
  }
  out.value = t.numerator * t.numerator / denom;
  return out;
}

JFunctional j_functional(const ParametricModel& model, const Prior& prior, const LossSpec& loss,
                         const QuadOptions& q) {
  if (prior.dim() != model.num_params()) throw DimensionError("prior and model dimensions differ");
  const auto c = canonical_c(model, loss, q.solver);
  const int levels = std::max(2, q.refinements) + 1;
  JFunctional out;
  for (int level = 0; level < levels; ++level)
    out.levels.push_back(van_trees_level(prior, loss, c, nullptr, q, level, true).j);
  const double last = out.levels.back();
  const double before = out.levels[out.levels.size() - 2];
  out.value = last;
  out.drift = std::abs(last - before) / std::max(std::abs(last), 1e-300);
  if (!std::isfinite(last) || out.drift > 0.05) {
    std::ostringstream os;
    os << "J(pi) does not settle under grid refinement (relative drift " << out.drift
       << "); the prior likely violates the boundary-zero or finite-J conditions";
    throw DivergenceError(os.str(), out.drift);
  }
  return out;
}

}  // namespace qbound
