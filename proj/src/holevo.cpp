#include "qbound/holevo.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "qbound/linalg.hpp"

namespace qbound {

using nlohmann::json;

HolevoProblem HolevoProblem::make(ModelPoint point, RMatrix weight) {
  const int p = point.num_params();
  if (p == 0) throw InputError("model has no parameters");
  if (weight.rows() != p || weight.cols() != p) throw DimensionError("weight matrix must be p x p");
  if (!weight.allFinite()) throw InputError("weight matrix has non-finite entries");
  const double scale = std::max(1.0, weight.cwiseAbs().maxCoeff());
  if ((weight - weight.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw InputError("weight matrix is not symmetric");
  weight = 0.5 * (weight + weight.transpose());
  if (min_eigenvalue(weight) <= 1e-10) throw InputError("weight matrix is not positive-definite");
  for (const auto& d : point.derivs) {
    if (d.rows() != point.dim()) throw DimensionError("derivative dimension mismatch");
    if (std::abs(d.trace()) > 1e-9) throw InputError("state derivatives must be traceless");
  }
  return {std::move(point), std::move(weight)};
}

json HolevoOptions::to_json() const {
  return {{"seed", seed},           {"max_iters", max_iters},     {"multistart", multistart},
          {"smoothing", smoothing}, {"rel_tol", rel_tol},         {"stall_iters", stall_iters},
          {"restart_scale", restart_scale}};
}

HolevoOptions HolevoOptions::from_json(const json& j) {
  static const std::set<std::string> keys = {"seed",    "max_iters",   "multistart",   "smoothing",
                                             "rel_tol", "stall_iters", "restart_scale"};
  if (!j.is_object()) throw InputError("solver options must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw InputError("unknown solver option '" + it.key() + "'");
  HolevoOptions o;
  try {
    o.seed = j.value("seed", o.seed);
    o.max_iters = j.value("max_iters", o.max_iters);
    o.multistart = j.value("multistart", o.multistart);
    o.smoothing = j.value("smoothing", o.smoothing);
    o.rel_tol = j.value("rel_tol", o.rel_tol);
    o.stall_iters = j.value("stall_iters", o.stall_iters);
    o.restart_scale = j.value("restart_scale", o.restart_scale);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed solver options: ") + e.what());
  }
  if (o.max_iters < 1 || o.multistart < 0 || o.smoothing.empty() || o.stall_iters < 1)
    throw InputError("invalid solver options");
  for (double e : o.smoothing)
    if (!(e > 0.0)) throw InputError("smoothing levels must be positive");
  return o;
}

CMatrix z_matrix(const CMatrix& rho, const XCollection& x) {
  const auto p = static_cast<Eigen::Index>(x.size());
  CMatrix z(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (x[static_cast<std::size_t>(i)].rows() != rho.rows()) throw DimensionError("X dimension mismatch");
    const CMatrix rx = rho * x[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j)
      z(i, j) = rx.cwiseProduct(x[static_cast<std::size_t>(j)].transpose()).sum();
  }
  return hermitian_part(z);
}

namespace {

// Splits G^1/2 Z G^1/2 into its real part and the real antisymmetric matrix A
// with Im(G^1/2 Z G^1/2) = A.
struct WeightedZ {
  RMatrix re;
  RMatrix im;
};

WeightedZ weighted(const RMatrix& gh, const CMatrix& z) {
  RMatrix re = gh * z.real() * gh;
  RMatrix im = gh * z.imag() * gh;
  return {0.5 * (re + re.transpose()), 0.5 * (im - im.transpose())};
}

}  // namespace

double holevo_objective(const RMatrix& g, const CMatrix& z) {
  if (g.rows() != z.rows()) throw DimensionError("G and Z differ in size");
  const RMatrix gh = sym_sqrt(g);
  const auto w = weighted(gh, z);
  CMatrix ia = cplx(0.0, 1.0) * w.im.cast<cplx>();
  return w.re.trace() + eig_hermitian(ia).values.cwiseAbs().sum();
}

RMatrix recover_v0(const RMatrix& g, const CMatrix& z) {
  const RMatrix gh = sym_sqrt(g);
  const RMatrix ghi = sym_inv_sqrt(g);
  const auto w = weighted(gh, z);
  RMatrix v = ghi * (w.re + abs_antisymmetric(w.im)) * ghi;
  return 0.5 * (v + v.transpose());
}

double constraint_residual(const ModelPoint& pt, const XCollection& x) {
  double r = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    r = std::max(r, std::abs((pt.rho * x[j]).trace()));
    for (std::size_t i = 0; i < pt.derivs.size(); ++i) {
      const double v = (pt.derivs[i] * x[j]).trace().real();
      r = std::max(r, std::abs(v - (i == j ? 1.0 : 0.0)));
    }
  }
  return r;
}

RMatrix helstrom_quarter(const ParametricModel& model, const RVector& theta) {
  return 0.25 * helstrom_matrix(model, theta).values;
}

namespace {

// The optimization in coordinates: X_j has real coordinates x_j in the
// orthonormal Hermitian basis, x_j = x0_j + N z_j with N spanning the null
// space of the linear constraints.
class HolevoSolver {
 public:
  HolevoSolver(const HolevoProblem& prob) : prob_(prob) {
    const auto& pt = prob.point;
    d_ = pt.dim();
    p_ = pt.num_params();
    basis_ = hermitian_basis(d_);
    const auto n = static_cast<Eigen::Index>(basis_.size());
    q_.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      const CMatrix rb = pt.rho * basis_[static_cast<std::size_t>(a)];
      for (Eigen::Index b = 0; b < n; ++b)
        q_(a, b) = rb.cwiseProduct(basis_[static_cast<std::size_t>(b)].transpose()).sum();
    }
    q_ = hermitian_part(q_);
    cons_.resize(p_ + 1, n);
    for (int i = 0; i < p_; ++i) cons_.row(i) = to_coords(pt.derivs[static_cast<std::size_t>(i)], basis_).transpose();
    cons_.row(p_) = to_coords(pt.rho, basis_).transpose();
    const auto ns = null_space(cons_);
    if (ns.rank < p_ + 1) {
      throw InfeasibleError(
          "the state derivatives are linearly dependent (singular Helstrom matrix); "
          "no X satisfies the unbiasedness constraints");
    }
    null_ = ns.basis;
    gh_ = sym_sqrt(prob.weight);
    init_particular();
  }

  Eigen::Index num_free() const { return null_.cols() * p_; }
  const RMatrix& particular() const { return x0_; }
  double helstrom_value() const { return helstrom_value_; }

  RMatrix coords_of(const XCollection& x) const {
    RMatrix c(static_cast<Eigen::Index>(basis_.size()), p_);
    for (int j = 0; j < p_; ++j) c.col(j) = to_coords(x[static_cast<std::size_t>(j)], basis_);
    return c;
  }

  XCollection collection(const RMatrix& xc) const {
    XCollection x;
    for (int j = 0; j < p_; ++j) x.push_back(hermitian_part(from_coords(xc.col(j), basis_)));
    return x;
  }

  RMatrix expand(const RVector& z) const {
    return x0_ + null_ * Eigen::Map<const RMatrix>(z.data(), null_.cols(), p_);
  }

  /// Null-space coordinates of the projection of xc onto the feasible set.
  RVector project(const RMatrix& xc) const {
    RMatrix z = null_.transpose() * (xc - x0_);
    return Eigen::Map<const RVector>(z.data(), z.size());
  }

  CMatrix zmat(const RMatrix& xc) const {
    const CMatrix c = xc.cast<cplx>();
    return hermitian_part(c.transpose() * q_ * c);
  }

  double exact(const RVector& z) const { return holevo_objective(prob_.weight, zmat(expand(z))); }

  /// Smoothed objective trace(G Re Z) + trace sqrt(A^T A + eps) and its gradient.
  double smoothed(const RVector& z, double eps, RVector* grad) const {
    const RMatrix xc = expand(z);
    const CMatrix zm = zmat(xc);
    const auto w = weighted(gh_, zm);
    const RMatrix ata = w.im.transpose() * w.im;
    Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (ata + ata.transpose()));
    const RVector lam = es.eigenvalues().cwiseMax(0.0);
    double f = w.re.trace();
    for (Eigen::Index k = 0; k < lam.size(); ++k) f += std::sqrt(lam(k) + eps);
    if (grad) {
      const RVector inv = (lam.array() + eps).sqrt().inverse().matrix();
      const RMatrix sinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
      const RMatrix b = gh_ * sinv * w.im.transpose() * gh_;
      const CMatrix omega = prob_.weight.cast<cplx>() - cplx(0.0, 1.0) * b.cast<cplx>();
      const RMatrix gx = 2.0 * (q_ * xc.cast<cplx>() * omega).real();
      const RMatrix gz = null_.transpose() * gx;
      *grad = Eigen::Map<const RVector>(gz.data(), gz.size());
    }
    return f;
  }

  double smoothing_scale(const RVector& z) const {
    const double re = (prob_.weight * zmat(expand(z)).real()).trace();
    return std::max(re, 1e-300);
  }

 private:
  void init_particular() {
    const auto& pt = prob_.point;
    try {
      const auto l = sld(pt);
      const RMatrix h = helstrom_matrix(pt, l).values;
      Eigen::LDLT<RMatrix> ldlt(h);
      if (min_eigenvalue(h) <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
        throw InfeasibleError("Helstrom matrix is singular");
      const RMatrix hinv = ldlt.solve(RMatrix::Identity(p_, p_));
      helstrom_value_ = (prob_.weight * hinv).trace();
      x0_.resize(static_cast<Eigen::Index>(basis_.size()), p_);
      for (int j = 0; j < p_; ++j) {
        CMatrix xj = CMatrix::Zero(d_, d_);
        for (int k = 0; k < p_; ++k) xj += hinv(j, k) * l.slds[static_cast<std::size_t>(k)];
        x0_.col(j) = to_coords(xj, basis_);
      }
    } catch (const RankDeficiencyError&) {
      // Singular mixed state: minimum-norm feasible point instead.
      helstrom_value_ = std::numeric_limits<double>::quiet_NaN();
      RMatrix rhs = RMatrix::Zero(p_ + 1, p_);
      rhs.topRows(p_) = RMatrix::Identity(p_, p_);
      x0_ = cons_.completeOrthogonalDecomposition().solve(rhs);
    }
  }

  const HolevoProblem& prob_;
  int d_ = 0;
  int p_ = 0;
  std::vector<CMatrix> basis_;
  CMatrix q_;      // Q_ab = trace(rho B_a B_b)
  RMatrix cons_;   // rows: rho'_i then rho, in coordinates
  RMatrix null_;
  RMatrix gh_;
  RMatrix x0_;
  double helstrom_value_ = 0.0;
};

struct StageResult {
  RVector z;
  int iterations = 0;
  bool converged = false;
};

// BFGS with Armijo backtracking on one smoothing level.
StageResult minimize_stage(const HolevoSolver& s, RVector z, double eps, const HolevoOptions& opts) {
  StageResult out;
  const auto n = z.size();
  if (n == 0) {
    out.z = z;
    out.converged = true;
    return out;
  }
  RVector g;
  double f = s.smoothed(z, eps, &g);
  RMatrix hinv = RMatrix::Identity(n, n);
  bool scaled = false;
  int stall = 0;
  for (int it = 0; it < opts.max_iters; ++it) {
    out.iterations = it + 1;
    if (g.norm() <= 1e-15 * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
    RVector dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    double t = 1.0;
    RVector gn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      fn = s.smoothed(z + t * dir, eps, &gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No representable decrease left along a descent direction.
      out.converged = true;
      break;
    }
    const RVector step = t * dir;
    const RVector y = gn - g;
    const double sy = step.dot(y);
    if (sy > 1e-300 && sy > 1e-12 * step.norm() * y.norm()) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const RMatrix ident = RMatrix::Identity(n, n);
      hinv = (ident - rho * step * y.transpose()) * hinv * (ident - rho * y * step.transpose()) +
             rho * step * step.transpose();
    }
    const double change = std::abs(f - fn);
    z += step;
    f = fn;
    g = gn;
    stall = change <= opts.rel_tol * std::abs(f) ? stall + 1 : 0;
    if (stall >= opts.stall_iters) {
      out.converged = true;
      break;
    }
  }
  out.z = z;
  return out;
}

struct RunResult {
  RVector z;
  double value;
  int iterations;
  double final_eps;
};

RunResult continuation(const HolevoSolver& s, RVector z, const HolevoOptions& opts) {
  RunResult r{z, s.exact(z), 0, 0.0};
  const double scale = s.smoothing_scale(z);
  for (std::size_t k = 0; k < opts.smoothing.size(); ++k) {
    const double eps = opts.smoothing[k] * scale * scale;
    auto st = minimize_stage(s, z, eps, opts);
    r.iterations += st.iterations;
    z = st.z;
    r.final_eps = eps;
    const double v = s.exact(z);
    if (v <= r.value) {
      r.value = v;
      r.z = z;
    }
    if (k + 1 == opts.smoothing.size() && !st.converged) {
      std::ostringstream os;
      os << "Holevo solver did not converge within " << opts.max_iters
         << " iterations at smoothing " << eps << "; best value " << r.value;
      throw ConvergenceError(os.str(), r.value);
    }
  }
  return r;
}

}  // namespace

HolevoSolution solve_holevo(const HolevoProblem& problem, const HolevoOptions& opts,
                            const XCollection* warm_start) {
  HolevoSolver s(problem);
  const auto nfree = s.num_free();
  RVector start = RVector::Zero(nfree);
  if (warm_start && warm_start->size() == static_cast<std::size_t>(problem.point.num_params())) {
    RVector w = s.project(s.coords_of(*warm_start));
    if (s.exact(w) < s.exact(start)) start = w;
  }

  HolevoSolution sol;
  sol.diagnostics.initial_value = s.exact(RVector::Zero(nfree));
  sol.diagnostics.helstrom_value = s.helstrom_value();

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double xscale = std::max(1e-3, s.particular().norm() / std::sqrt(static_cast<double>(s.particular().size())));

  std::vector<RMatrix> v0s;
  RunResult best{start, std::numeric_limits<double>::infinity(), 0, 0.0};
  const int starts = nfree == 0 ? 1 : 1 + opts.multistart;
  for (int k = 0; k < starts; ++k) {
    RVector z0 = start;
    if (k > 0)
      for (Eigen::Index i = 0; i < nfree; ++i) z0(i) += opts.restart_scale * xscale * normal(rng);
    auto r = continuation(s, z0, opts);
    sol.diagnostics.iterations += r.iterations;
    v0s.push_back(recover_v0(problem.weight, s.zmat(s.expand(r.z))));
    if (r.value < best.value) best = r;
  }
  sol.diagnostics.starts = starts;
  for (std::size_t a = 0; a < v0s.size(); ++a)
    for (std::size_t b = a + 1; b < v0s.size(); ++b)
      sol.diagnostics.multistart_spread = std::max(sol.diagnostics.multistart_spread, (v0s[a] - v0s[b]).norm());

  const RMatrix xc = s.expand(best.z);
  sol.x_star = s.collection(xc);
  sol.z_star = s.zmat(xc);
  sol.value = holevo_objective(problem.weight, sol.z_star);
  sol.v0 = recover_v0(problem.weight, sol.z_star);
  sol.diagnostics.final_smoothing = best.final_eps;
  sol.diagnostics.smoothing_gap =
      best.final_eps > 0.0 ? s.smoothed(best.z, best.final_eps, nullptr) - sol.value : 0.0;
  sol.diagnostics.constraint_residual = constraint_residual(problem.point, sol.x_star);
  return sol;
}

HolevoSolution solve_holevo(const ParametricModel& model, const RVector& theta, const RMatrix& g,
                            const HolevoOptions& opts) {
  return solve_holevo(HolevoProblem::make(ModelPoint::at(model, theta), g), opts);
}

SmoothedObjective smoothed_objective(const HolevoProblem& problem, const RVector& z, double eps) {
  const HolevoSolver s(problem);
  if (z.size() != s.num_free()) throw DimensionError("wrong number of free coordinates");
  SmoothedObjective out;
  out.value = s.smoothed(z, eps, &out.gradient);
  return out;
}

Eigen::Index num_free_coordinates(const HolevoProblem& problem) { return HolevoSolver(problem).num_free(); }

DualBound dual_bound(const HolevoSolution& solution, const RMatrix& g) {
  const double lo = min_eigenvalue(solution.v0);
  if (lo <= 1e-10) {
    std::ostringstream os;
    os << "V0 is singular (smallest eigenvalue " << lo << "); dual bounds need a nonsingular V0";
    throw NumericalError(os.str());
  }
  RMatrix k = solution.v0 * g * solution.v0;
  return {0.5 * (k + k.transpose()), solution.value};
}

RMatrix dual_weight(const HolevoSolution& solution, const DualBound& dual) {
  const RMatrix i0 = solution.v0.inverse();
  RMatrix g = i0 * dual.k0 * i0;
  return 0.5 * (g + g.transpose());
}

DualCheck check_dual(const RMatrix& k, const RMatrix& info, double c_k, double tol) {
  if (k.rows() != info.rows() || k.cols() != info.cols()) throw DimensionError("K and I differ in size");
  const double t = (k * info).trace();
  return {t <= c_k + tol, c_k - t};
}

FullModel full_model(const CMatrix& rho, const std::vector<CMatrix>& derivs) {
  const int d = static_cast<int>(rho.rows());
  const double lo = min_eigenvalue(rho);
  if (lo <= Numerics::defaults().singular_tol) {
    std::ostringstream os;
    os << "full-model embedding needs a nonsingular state (smallest eigenvalue " << lo << ")";
    throw RankDeficiencyError(os.str(), lo);
  }
  const int n = d * d - 1;
  if (static_cast<int>(derivs.size()) != n) throw DimensionError("full model needs d^2-1 derivatives");
  const auto basis = hermitian_basis(d);
  RMatrix cons(n + 1, n + 1);
  for (int i = 0; i < n; ++i) cons.row(i) = to_coords(derivs[static_cast<std::size_t>(i)], basis).transpose();
  cons.row(n) = to_coords(rho, basis).transpose();
  Eigen::FullPivLU<RMatrix> lu(cons);
  if (!lu.isInvertible()) throw InfeasibleError("full-model derivatives are linearly dependent");
  RMatrix rhs = RMatrix::Zero(n + 1, n);
  rhs.topRows(n) = RMatrix::Identity(n, n);
  const RMatrix yc = lu.solve(rhs);
  FullModel fm;
  fm.derivs = derivs;
  for (int j = 0; j < n; ++j) fm.y.push_back(hermitian_part(from_coords(yc.col(j), basis)));
  fm.z = z_matrix(rho, fm.y);
  return fm;
}

FullModel full_model(const CMatrix& rho) {
  std::vector<CMatrix> derivs;
  for (const auto& g : gell_mann(static_cast<int>(rho.rows()))) derivs.push_back(0.5 * g);
  return full_model(rho, derivs);
}

CMatrix full_model_z(const CMatrix& rho) { return full_model(rho).z; }

FullModel full_model_embedding(const ModelPoint& pt, const XCollection& x) {
  const int d = pt.dim();
  const int p = pt.num_params();
  const auto gm = gell_mann(d);
  const int n = d * d - 1;
  if (p > n) throw DimensionError("submodel has more parameters than the full model");
  // Centered Gell-Mann matrices span L^2_0(rho).
  std::vector<CMatrix> e;
  for (const auto& g : gm) e.push_back(g - (pt.rho * g).trace() * CMatrix::Identity(d, d));
  RMatrix gram(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      gram(a, b) = (pt.rho * e[static_cast<std::size_t>(a)] * e[static_cast<std::size_t>(b)]).trace().real();
  RMatrix xi(n, p);
  for (int j = 0; j < p; ++j)
    for (int a = 0; a < n; ++a)
      xi(a, j) = 0.5 * (gm[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(j)]).trace().real();
  const auto ns = null_space((gram * xi).transpose());
  std::vector<CMatrix> derivs = pt.derivs;
  for (Eigen::Index c = 0; c < ns.basis.cols(); ++c) {
    CMatrix mu = CMatrix::Zero(d, d);
    for (int a = 0; a < n; ++a) mu += ns.basis(a, c) * e[static_cast<std::size_t>(a)];
    derivs.push_back(0.5 * (pt.rho * mu + mu * pt.rho));
  }
  return full_model(pt.rho, derivs);
}

EmbeddingReport embedding_sequence(const HolevoSolution& solution, const ModelPoint& pt,
                                   const std::vector<double>& eps_schedule, double delta_floor) {
  const auto fm = full_model_embedding(pt, solution.x_star);
  const auto n = fm.z.rows();
  const auto p = solution.v0.rows();
  const RMatrix vinv = solution.v0.inverse();
  CMatrix diag_v = CMatrix::Zero(n, n);
  diag_v.topLeftCorner(p, p) = solution.v0.cast<cplx>();

  EmbeddingReport rep;
  for (double eps : eps_schedule) {
    RVector dvec = RVector::Ones(n);
    dvec.tail(n - p).setConstant(eps);
    const CMatrix dz = dvec.cast<cplx>().asDiagonal() * fm.z * dvec.cast<cplx>().asDiagonal();
    const double violation = max_eigenvalue(hermitian_part(dz - diag_v));
    const double delta = std::max(1.01 * std::max(0.0, violation), delta_floor);
    const CMatrix scaled = diag_v + delta * CMatrix::Identity(n, n) - dz;
    // W_eps - Z_full is congruent to `scaled` through D_eps^-1.
    const double margin = min_eigenvalue(hermitian_part(scaled));
    if (!(margin > 0.0)) {
      std::ostringstream os;
      os << "embedding construction failed at eps=" << eps << ": W_eps - Z_full has eigenvalue " << margin;
      throw NumericalError(os.str());
    }
    const RVector dinv = dvec.cwiseInverse();
    RMatrix w = dinv.asDiagonal() * (diag_v.real() + delta * RMatrix::Identity(n, n)) * dinv.asDiagonal();
    const RMatrix winv = w.ldlt().solve(RMatrix::Identity(n, n));
    const double gap = (winv.topLeftCorner(p, p) - vinv).norm();
    rep.steps.push_back({eps, delta, margin, gap, true});
  }
  for (std::size_t k = 1; k < rep.steps.size(); ++k) {
    const double prev = rep.steps[k - 1].gap;
    const double cur = rep.steps[k].gap;
    if (!(cur < prev) && !(prev <= 1e-12 && cur <= 1e-12)) rep.monotone = false;
  }
  return rep;
}

}  // namespace qbound
