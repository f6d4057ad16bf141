#include "qbound/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "qbound/linalg.hpp"

namespace qbound {

using nlohmann::json;

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::fixed_basis: return "fixed_basis";
    case SchemeKind::alternating_bases: return "alternating_bases";
    case SchemeKind::random_basis_covariant: return "random_basis_covariant";
    case SchemeKind::two_step_adaptive: return "two_step_adaptive";
  }
  return "unknown";
}

SchemeKind parse_scheme(const std::string& s) {
  if (s == "fixed" || s == "fixed_basis") return SchemeKind::fixed_basis;
  if (s == "alternating" || s == "alternating_bases") return SchemeKind::alternating_bases;
  if (s == "random-basis" || s == "random_basis" || s == "random_basis_covariant")
    return SchemeKind::random_basis_covariant;
  if (s == "two-step" || s == "two_step" || s == "two_step_adaptive") return SchemeKind::two_step_adaptive;
  throw InputError("unknown measurement scheme '" + s + "'");
}

std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::mle ? "mle" : "bayes_mean"; }

EstimatorKind parse_estimator(const std::string& s) {
  if (s == "mle") return EstimatorKind::mle;
  if (s == "bayes_mean" || s == "bayes-mean") return EstimatorKind::bayes_mean;
  throw InputError("unknown estimator '" + s + "'");
}

namespace {

void check_unitary(const CMatrix& u) {
  if (u.rows() != u.cols() || u.rows() < 2) throw DimensionError("a measurement basis must be a square matrix");
  if (max_abs_entry(u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols())) > 1e-9)
    throw InputError("measurement basis columns are not orthonormal");
}

bool is_qubit(const ParametricModel& m) { return m.dim() == 2; }

CMatrix fourier_basis(int d) {
  CMatrix f(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k)
      f(j, k) = std::polar(1.0 / std::sqrt(static_cast<double>(d)), 2.0 * std::numbers::pi * j * k / d);
  return f;
}

RVector axis(int k) {
  RVector n = RVector::Zero(3);
  n(k) = 1.0;
  return n;
}

std::vector<CMatrix> pauli_bases(const ParametricModel& model) {
  std::vector<CMatrix> out{pauli_eigenbasis(axis(0)), pauli_eigenbasis(axis(1))};
  if (model.family() != Family::bloch_equatorial) out.push_back(pauli_eigenbasis(axis(2)));
  return out;
}

/// Bloch vector of the model state at theta (qubits).
RVector bloch_vector(const ParametricModel& model, const RVector& theta) {
  const CMatrix rho = model.state(theta).matrix();
  RVector n(3);
  for (int k = 0; k < 3; ++k) n(k) = (rho * pauli(k)).trace().real();
  return n;
}

}  // namespace

MeasurementScheme MeasurementScheme::fixed(CMatrix basis) {
  check_unitary(basis);
  return {SchemeKind::fixed_basis, {std::move(basis)}, 0.0};
}

MeasurementScheme MeasurementScheme::alternating(std::vector<CMatrix> bases) {
  if (bases.empty()) throw InputError("alternating scheme needs at least one basis");
  for (const auto& b : bases) check_unitary(b);
  return {SchemeKind::alternating_bases, std::move(bases), 0.0};
}

MeasurementScheme MeasurementScheme::random_basis() { return {SchemeKind::random_basis_covariant, {}, 0.0}; }

MeasurementScheme MeasurementScheme::standard(SchemeKind kind, const ParametricModel& model) {
  switch (kind) {
    case SchemeKind::fixed_basis: return fixed(CMatrix::Identity(model.dim(), model.dim()));
    case SchemeKind::alternating_bases:
      if (is_qubit(model)) return alternating(pauli_bases(model));
      return alternating({CMatrix::Identity(model.dim(), model.dim()), fourier_basis(model.dim())});
    case SchemeKind::random_basis_covariant: return random_basis();
    case SchemeKind::two_step_adaptive: return two_step_scheme(model, 0.1);
  }
  throw InputError("unknown measurement scheme");
}

MeasurementScheme two_step_scheme(const ParametricModel& model, double first_fraction) {
  if (!(first_fraction > 0.0 && first_fraction < 1.0)) throw InputError("first-stage fraction must lie in (0, 1)");
  if (!is_qubit(model)) throw InputError("the two-step scheme is implemented for qubit models");
  return {SchemeKind::two_step_adaptive, pauli_bases(model), first_fraction};
}

CMatrix pauli_eigenbasis(const RVector& n) {
  if (n.size() != 3 || n.norm() < 1e-12) throw InputError("Pauli direction must be a non-zero 3-vector");
  const RVector u = n / n.norm();
  const CMatrix s = u(0) * pauli(0) + u(1) * pauli(1) + u(2) * pauli(2);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(s);
  CMatrix b(2, 2);
  b.col(0) = es.eigenvectors().col(1);
  b.col(1) = es.eigenvectors().col(0);
  return b;
}

CMatrix haar_unitary(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  if (d == 2) {
    // first column uniform on the unit sphere of C^2; the second is fixed up to a phase
    CVector u(2);
    u << cplx(normal(rng), normal(rng)), cplx(normal(rng), normal(rng));
    u.normalize();
    const cplx ph = std::polar(1.0, 2.0 * std::numbers::pi * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    CMatrix q(2, 2);
    q << u(0), -ph * std::conj(u(1)), u(1), ph * std::conj(u(0));
    return q;
  }
  CMatrix g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = cplx(normal(rng), normal(rng));
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    const cplx rk = r(k, k);
    const double a = std::abs(rk);
    if (a > 0.0) q.col(k) *= rk / a;
  }
  return q;
}

Sample Sample::prefix(std::size_t n) const {
  n = std::min(n, size());
  Sample out;
  std::map<int, int> remap;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = remap.try_emplace(basis_index[i], static_cast<int>(out.bases.size()));
    if (fresh) out.bases.push_back(bases[static_cast<std::size_t>(basis_index[i])]);
    out.basis_index.push_back(it->second);
    out.outcome.push_back(outcome[i]);
  }
  out.stage_one = std::min(stage_one, static_cast<int>(n));
  return out;
}

namespace {

int draw_outcome(const CMatrix& rho, const CMatrix& basis, std::mt19937_64& rng) {
  const auto d = basis.cols();
  RVector p(d);
  for (Eigen::Index k = 0; k < d; ++k) p(k) = std::max(0.0, (basis.col(k).adjoint() * rho * basis.col(k))(0, 0).real());
  std::uniform_real_distribution<double> unif(0.0, p.sum());
  const double u = unif(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    acc += p(k);
    if (u < acc) return static_cast<int>(k);
  }
  // u landed on the upper end: take the last outcome with positive mass
  for (Eigen::Index k = d - 1; k >= 0; --k)
    if (p(k) > 0.0) return static_cast<int>(k);
  return 0;
}

void append_cycled(Sample& s, const CMatrix& rho, const std::vector<CMatrix>& bases, int count, std::mt19937_64& rng) {
  const int offset = static_cast<int>(s.bases.size());
  s.bases.insert(s.bases.end(), bases.begin(), bases.end());
  for (int i = 0; i < count; ++i) {
    const int b = i % static_cast<int>(bases.size());
    s.basis_index.push_back(offset + b);
    s.outcome.push_back(draw_outcome(rho, bases[static_cast<std::size_t>(b)], rng));
  }
}

}  // namespace

Sample sample_outcomes(const ParametricModel& model, const RVector& theta, const MeasurementScheme& scheme,
                       int n_copies, std::mt19937_64& rng) {
  if (n_copies < 1) throw InputError("number of copies must be at least 1");
  const CMatrix rho = model.state(theta).matrix();
  for (const auto& b : scheme.bases)
    if (b.rows() != model.dim()) throw DimensionError("measurement basis and model dimensions differ");
  Sample s;
  switch (scheme.kind) {
    case SchemeKind::fixed_basis:
    case SchemeKind::alternating_bases:
      append_cycled(s, rho, scheme.bases, n_copies, rng);
      break;
    case SchemeKind::random_basis_covariant:
      for (int i = 0; i < n_copies; ++i) {
        s.bases.push_back(haar_unitary(model.dim(), rng));
        s.basis_index.push_back(i);
        s.outcome.push_back(draw_outcome(rho, s.bases.back(), rng));
      }
      break;
    case SchemeKind::two_step_adaptive: {
      const int n1 = std::min(n_copies, static_cast<int>(std::ceil(scheme.first_fraction * n_copies)));
      append_cycled(s, rho, scheme.bases, n1, rng);
      s.stage_one = n1;
      if (n_copies > n1) append_cycled(s, rho, stage_two_bases(model, s), n_copies - n1, rng);
      break;
    }
  }
  return s;
}

Sample sample_outcomes(const ParametricModel& model, const RVector& theta, const MeasurementScheme& scheme,
                       int n_copies, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_outcomes(model, theta, scheme, n_copies, rng);
}

std::vector<CMatrix> adapted_bases(const ParametricModel& model, const RVector& theta_hat) {
  if (!is_qubit(model)) throw InputError("adapted bases are defined for qubit models");
  RVector n = bloch_vector(model, theta_hat);
  if (model.family() == Family::bloch_equatorial) n(2) = 0.0;
  if (n.norm() < 1e-9) n = axis(0);
  n /= n.norm();
  // Orthonormal frame (n, e1, e2); e1 stays in the equatorial plane.
  RVector e1(3);
  e1 << -n(1), n(0), 0.0;
  if (e1.norm() < 1e-9) e1 = axis(0);
  e1 /= e1.norm();
  RVector e2(3);
  e2 << n(1) * e1(2) - n(2) * e1(1), n(2) * e1(0) - n(0) * e1(2), n(0) * e1(1) - n(1) * e1(0);
  if (model.is_pure()) return {pauli_eigenbasis(e1), pauli_eigenbasis(e2)};
  if (model.family() == Family::bloch_equatorial) return {pauli_eigenbasis(n), pauli_eigenbasis(e1)};
  return {pauli_eigenbasis(n), pauli_eigenbasis(e1), pauli_eigenbasis(e2)};
}

std::vector<CMatrix> stage_two_bases(const ParametricModel& model, const Sample& stage_one) {
  return adapted_bases(model, mle_estimate(stage_one, model).theta);
}

std::vector<LikelihoodTerm> likelihood_terms(const Sample& s) {
  std::map<std::pair<int, int>, double> counts;
  for (std::size_t i = 0; i < s.size(); ++i) counts[{s.basis_index[i], s.outcome[i]}] += 1.0;
  std::vector<LikelihoodTerm> out;
  out.reserve(counts.size());
  for (const auto& [key, c] : counts)
    out.push_back({s.bases[static_cast<std::size_t>(key.first)].col(key.second), c});
  return out;
}

double log_likelihood(const ParametricModel& model, const std::vector<LikelihoodTerm>& terms, const RVector& theta) {
  const CMatrix rho = model.state(theta).matrix();
  double l = 0.0;
  for (const auto& t : terms) {
    const double p = (t.v.adjoint() * rho * t.v)(0, 0).real();
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    l += t.count * std::log(p);
  }
  return l;
}

namespace {

bool on_boundary(const Domain& dom, const RVector& theta) {
  if (dom.kind == Domain::Kind::ball) return theta.norm() >= dom.radius - 1e-7;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (theta(i) <= dom.lower(i) + 1e-7 || theta(i) >= dom.upper(i) - 1e-7) return true;
  return false;
}

// Affine families: p_x(theta) = a_x + b_x . theta, concave log-likelihood.
Estimate mle_affine(const std::vector<LikelihoodTerm>& terms, const ParametricModel& model, const MleOptions& opts) {
  const auto p = model.num_params();
  const RVector zero = RVector::Zero(p);
  const CMatrix rho0 = model.state(zero).matrix();
  const auto derivs = model.derivatives(zero);
  const auto n = terms.size();
  RVector a(n), c(n);
  RMatrix b(n, p);
  for (std::size_t x = 0; x < n; ++x) {
    const CVector& v = terms[x].v;
    a(x) = (v.adjoint() * rho0 * v)(0, 0).real();
    for (int k = 0; k < p; ++k) b(x, k) = (v.adjoint() * derivs[static_cast<std::size_t>(k)] * v)(0, 0).real();
    c(x) = terms[x].count;
  }
  auto loglik = [&](const RVector& th) {
    const RVector pr = a + b * th;
    if ((pr.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    return (c.array() * pr.array().log()).sum();
  };
  const Domain& dom = model.domain();
  RVector theta = zero;
  double l = loglik(theta);
  Estimate est;
  for (int it = 0; it < opts.max_iters; ++it) {
    est.iterations = it + 1;
    const RVector pr = a + b * theta;
    const RVector w = c.array() / pr.array();
    const RVector grad = b.transpose() * w;
    const RMatrix info = b.transpose() * (w.array() / pr.array()).matrix().asDiagonal() * b;
    const double ridge = 1e-12 * std::max(1.0, info.trace());
    RVector dir = (info + ridge * RMatrix::Identity(p, p)).ldlt().solve(grad);
    bool moved = false;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      const RVector target = dom.project(theta + dir);
      const RVector step = target - theta;
      const double slope = grad.dot(step);
      double t = 1.0;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        const RVector trial = theta + t * step;
        const double lt = loglik(trial);
        if (std::isfinite(lt) && lt >= l + 1e-4 * t * slope) {
          moved = (trial - theta).norm() > 0.0;
          const double change = (trial - theta).norm();
          theta = trial;
          const double dl = lt - l;
          l = lt;
          if (change < opts.tol * (1.0 + theta.norm()) || dl < 1e-14 * std::abs(l)) {
            est.theta = theta;
            est.log_likelihood = l;
            est.boundary = on_boundary(dom, theta);
            return est;
          }
          break;
        }
      }
      // projected Newton failed to ascend: fall back to a projected gradient direction
      dir = grad / std::max(1.0, info.trace());
    }
    if (!moved) break;
  }
  est.theta = theta;
  est.log_likelihood = l;
  est.boundary = on_boundary(dom, theta);
  return est;
}

// Measurement vectors as columns of v with their counts.
struct PackedTerms {
  CMatrix v;
  RVector count;
  double total = 0.0;
};

PackedTerms pack(const std::vector<LikelihoodTerm>& terms, Eigen::Index d) {
  PackedTerms pk{CMatrix(d, static_cast<Eigen::Index>(terms.size())), RVector(terms.size()), 0.0};
  for (std::size_t x = 0; x < terms.size(); ++x) {
    pk.v.col(static_cast<Eigen::Index>(x)) = terms[x].v;
    pk.count(static_cast<Eigen::Index>(x)) = terms[x].count;
  }
  pk.total = pk.count.sum();
  return pk;
}

double sphere_loglik(const PackedTerms& pk, const CVector& phi) {
  const RVector p = (pk.v.adjoint() * phi).cwiseAbs2();
  if ((p.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  return (pk.count.array() * p.array().log()).sum();
}

struct SphereFit {
  CVector phi;
  double l;
  int iterations;
};

// Newton ascent on the unit sphere in C^d, using the chart phi + T u with T
// spanning the real and imaginary directions orthogonal to phi.
SphereFit sphere_newton(const PackedTerms& pk, CVector phi, const MleOptions& opts) {
  const auto d = phi.size();
  const auto m = 2 * (d - 1);
  phi.normalize();
  double l = sphere_loglik(pk, phi);
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    CMatrix frame(d, d);
    frame.col(0) = phi;
    frame.rightCols(d - 1) = CMatrix::Identity(d, d).rightCols(d - 1);
    if (std::abs(phi(0)) < 0.5) frame.rightCols(d - 1) = CMatrix::Identity(d, d).leftCols(d - 1);
    Eigen::HouseholderQR<CMatrix> qr(frame);
    const CMatrix q = CMatrix(qr.householderQ()).rightCols(d - 1);
    CMatrix tang(d, m);
    for (Eigen::Index k = 0; k < d - 1; ++k) {
      tang.col(2 * k) = q.col(k);
      tang.col(2 * k + 1) = cplx(0.0, 1.0) * q.col(k);
    }
    const CVector a = pk.v.adjoint() * phi;
    const CMatrix c = pk.v.adjoint() * tang;
    const RVector aa = a.cwiseAbs2();
    // g1(x, k) = d log p_x / d u_k
    const RMatrix g1 = 2.0 * ((a.conjugate().asDiagonal() * c).real().array().colwise() / aa.array()).matrix();
    const RVector grad = g1.transpose() * pk.count;
    const RVector w = pk.count.array() / aa.array();
    const RMatrix hess = 2.0 * (c.adjoint() * w.asDiagonal() * c).real() -
                         g1.transpose() * pk.count.asDiagonal() * g1 - 2.0 * pk.total * RMatrix::Identity(m, m);
    if (grad.norm() < opts.tol * std::max(1.0, pk.total)) break;
    Eigen::SelfAdjointEigenSolver<RMatrix> es(hess);
    RVector u;
    if (es.eigenvalues().maxCoeff() < 0.0)
      u = -hess.ldlt().solve(grad);
    else
      u = grad / (2.0 * pk.total);
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const CVector trial = (phi + tang * (t * u)).normalized();
      const double lt = sphere_loglik(pk, trial);
      if (std::isfinite(lt) && lt >= l + 1e-4 * t * grad.dot(u)) {
        phi = trial;
        l = lt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return {phi, l, it};
}

Estimate mle_pure(const std::vector<LikelihoodTerm>& terms, const ParametricModel& model, const MleOptions& opts) {
  const int d = model.dim();
  const auto pk = pack(terms, d);
  // Linear-inversion start: top eigenvector of (d+1) * mean projector - 1.
  CMatrix lin = CMatrix::Zero(d, d);
  for (const auto& t : terms) lin += t.count * t.v * t.v.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(lin);
  std::vector<CVector> starts{es.eigenvectors().col(d - 1)};
  std::mt19937_64 rng(opts.seed);
  for (int k = 1; k < std::max(1, opts.multistart); ++k) starts.push_back(haar_unitary(d, rng).col(0));
  SphereFit best{CVector(), -std::numeric_limits<double>::infinity(), 0};
  int iters = 0;
  for (const auto& s : starts) {
    auto fit = sphere_newton(pk, s, opts);
    iters += fit.iterations;
    if (fit.l > best.l) best = fit;
  }
  if (!std::isfinite(best.l)) throw NumericalError("pure-state likelihood is zero at every start");
  CVector phi = best.phi;
  const double a0 = std::abs(phi(0));
  if (a0 > 0.0) phi *= std::conj(phi(0)) / a0;
  RVector theta(2 * (d - 1));
  for (int k = 1; k < d; ++k) {
    theta(2 * (k - 1)) = phi(k).real();
    theta(2 * (k - 1) + 1) = phi(k).imag();
  }
  if (theta.norm() > 1.0) theta /= theta.norm();
  Estimate est;
  est.theta = theta;
  est.log_likelihood = best.l;
  est.iterations = iters;
  est.boundary = a0 < 1e-6;
  return est;
}

}  // namespace

Estimate mle_estimate(const Sample& s, const ParametricModel& model, const MleOptions& opts) {
  if (s.size() == 0) throw InputError("no data");
  const auto terms = likelihood_terms(s);
  return model.is_pure() ? mle_pure(terms, model, opts) : mle_affine(terms, model, opts);
}

Estimate bayes_mean_estimate(const Sample& s, const ParametricModel& model, const Prior& prior, std::uint64_t seed,
                             const BayesMeanOptions& opts) {
  if (prior.dim() != model.num_params()) throw DimensionError("prior and model dimensions differ");
  const Estimate mle = mle_estimate(s, model, opts.mle);
  const auto terms = likelihood_terms(s);
  const auto p = model.num_params();
  // Centre strictly inside the prior support so the finite-difference Hessian is defined.
  RVector centre = mle.theta;
  const double lim = 0.98 * prior.radius();
  if (centre.norm() > lim) centre *= lim / centre.norm();
  auto ll = [&](const RVector& th) {
    if (!model.domain().contains(th)) return -std::numeric_limits<double>::infinity();
    try {
      return log_likelihood(model, terms, th);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const double h = 1e-4;
  RMatrix hess(p, p);
  const double l0 = ll(centre);
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      RVector e_i = RVector::Zero(p), e_j = RVector::Zero(p);
      e_i(i) = h;
      e_j(j) = h;
      const double v = (ll(centre + e_i + e_j) - ll(centre + e_i - e_j) - ll(centre - e_i + e_j) +
                        ll(centre - e_i - e_j)) / (4.0 * h * h);
      hess(i, j) = hess(j, i) = v;
    }
  RMatrix info = -hess;
  if (!info.allFinite() || !std::isfinite(l0)) info = RMatrix::Identity(p, p) * static_cast<double>(s.size());
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (info + info.transpose()));
  RVector ev = es.eigenvalues().cwiseMax(1e-3 * std::max(1.0, es.eigenvalues().maxCoeff()));
  const RMatrix cov_sqrt = es.eigenvectors() * (opts.inflation / ev.array()).sqrt().matrix().asDiagonal();
  const double log_det_sqrt = cov_sqrt.diagonal().size() > 0 ? std::log(std::abs(cov_sqrt.determinant())) : 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<RVector> pts;
  std::vector<double> logw;
  for (int k = 0; k < opts.samples; ++k) {
    RVector z(p);
    for (int i = 0; i < p; ++i) z(i) = normal(rng);
    const RVector th = centre + cov_sqrt * z;
    const double pi = prior.density(th);
    if (pi <= 0.0) continue;
    const double l = ll(th);
    if (!std::isfinite(l)) continue;
    const double logq = -0.5 * z.squaredNorm() - log_det_sqrt;
    pts.push_back(th);
    logw.push_back(l + std::log(pi) - logq);
  }
  Estimate est = mle;
  if (pts.empty()) return est;  // posterior mass out of reach of the proposal: keep the MLE
  const double mx = *std::max_element(logw.begin(), logw.end());
  RVector mean = RVector::Zero(p);
  double wsum = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double w = std::exp(logw[k] - mx);
    mean += w * pts[k];
    wsum += w;
  }
  est.theta = model.domain().project(mean / wsum);
  est.boundary = false;
  est.log_likelihood = ll(est.theta);
  return est;
}

EstimatorFn make_estimator(EstimatorKind kind, const ParametricModel& model, const Prior& prior) {
  if (kind == EstimatorKind::mle)
    return [model](const Sample& s, const RVector&, std::uint64_t seed) {
      MleOptions o;
      o.seed = seed;
      return mle_estimate(s, model, o);
    };
  return [model, prior](const Sample& s, const RVector&, std::uint64_t seed) {
    BayesMeanOptions o;
    o.mle.seed = seed;
    return bayes_mean_estimate(s, model, prior, seed, o);
  };
}

LossFn fidelity_loss(const ParametricModel& model) {
  return [model](const RVector& hat, const RVector& theta) {
    return std::max(0.0, 1.0 - fidelity(model.state(hat), model.state(theta)));
  };
}

json RiskEstimate::to_json() const {
  return {{"n_copies", n_copies},   {"trials", trials},       {"value", value},
          {"std_error", std_error}, {"mean_loss", mean_loss}, {"max_loss", max_loss},
          {"failures", failures},   {"boundary_estimates", boundary_estimates}};
}

RiskEstimate bayes_risk_mc(const ParametricModel& model, const Prior& prior, const MeasurementScheme& scheme,
                           const EstimatorFn& estimator, int n_copies, int trials, std::uint64_t seed, int workers,
                           const LossFn& loss) {
  if (trials < 1) throw InputError("trials must be positive");
  if (n_copies < 1) throw InputError("number of copies must be positive");
  if (prior.dim() != model.num_params()) throw DimensionError("prior and model dimensions differ");
  const LossFn lossf = loss ? loss : fidelity_loss(model);
  struct TrialResult {
    double loss = 0.0;
    bool failed = false;
    bool boundary = false;
    std::string error;
  };
  std::vector<TrialResult> res(static_cast<std::size_t>(trials));
  auto run = [&](int start, int stride) {
    for (int t = start; t < trials; t += stride) {
      auto& r = res[static_cast<std::size_t>(t)];
      std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(t)};
      std::mt19937_64 rng(ss);
      try {
        const RVector theta = prior.sample(rng);
        const Sample s = sample_outcomes(model, theta, scheme, n_copies, rng);
        const Estimate e = estimator(s, theta, rng());
        r.loss = lossf(e.theta, theta);
        r.boundary = e.boundary;
        if (!std::isfinite(r.loss)) throw NumericalError("non-finite loss");
      } catch (const std::exception& ex) {
        r.failed = true;
        r.error = ex.what();
      }
    }
  };
  const int w = std::max(1, std::min(workers, trials));
  if (w == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < w; ++k) pool.emplace_back(run, k, w);
    for (auto& th : pool) th.join();
  }
  RiskEstimate out;
  out.n_copies = n_copies;
  out.trials = trials;
  double sum = 0.0, sum2 = 0.0;
  int ok = 0;
  std::string first_error;
  for (const auto& r : res) {
    if (r.failed) {
      ++out.failures;
      if (first_error.empty()) first_error = r.error;
      continue;
    }
    ++ok;
    sum += r.loss;
    sum2 += r.loss * r.loss;
    out.max_loss = std::max(out.max_loss, r.loss);
    if (r.boundary) ++out.boundary_estimates;
  }
  if (out.failures > 0.01 * trials || ok == 0) {
    std::ostringstream os;
    os << out.failures << " of " << trials << " trials failed (more than 1%); first failure: " << first_error;
    throw NumericalError(os.str());
  }
  out.mean_loss = sum / ok;
  const double var = ok > 1 ? std::max(0.0, (sum2 - ok * out.mean_loss * out.mean_loss) / (ok - 1)) : 0.0;
  out.value = n_copies * out.mean_loss;
  out.std_error = n_copies * std::sqrt(var / ok);
  return out;
}

std::pair<double, double> EmpiricalInfo::functional(const std::function<double(const RMatrix&)>& f) const {
  if (!randomized) return {f(mean), 0.0};
  double s = 0.0, s2 = 0.0;
  for (const auto& m : samples) {
    const double v = f(m);
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(samples.size());
  const double mu = s / n;
  const double var = n > 1 ? std::max(0.0, (s2 - n * mu * mu) / (n - 1)) : 0.0;
  return {mu, std::sqrt(var / n)};
}

namespace {

RMatrix average_info(const ModelPoint& pt, const std::vector<CMatrix>& bases) {
  RMatrix acc = RMatrix::Zero(static_cast<Eigen::Index>(pt.derivs.size()), static_cast<Eigen::Index>(pt.derivs.size()));
  for (const auto& b : bases) acc += povm_fisher(pt, Povm::from_basis(b)).values;
  return acc / static_cast<double>(bases.size());
}

}  // namespace

EmpiricalInfo empirical_fisher(const ParametricModel& model, const RVector& theta, const MeasurementScheme& scheme,
                               int n_bases, std::uint64_t seed) {
  const auto pt = ModelPoint::at(model, theta);
  const auto p = model.num_params();
  EmpiricalInfo out;
  switch (scheme.kind) {
    case SchemeKind::fixed_basis:
    case SchemeKind::alternating_bases:
      for (const auto& b : scheme.bases) out.samples.push_back(povm_fisher(pt, Povm::from_basis(b)).values);
      out.mean = average_info(pt, scheme.bases);
      break;
    case SchemeKind::two_step_adaptive: {
      const double f = scheme.first_fraction;
      out.mean = f * average_info(pt, scheme.bases) + (1.0 - f) * average_info(pt, adapted_bases(model, theta));
      break;
    }
    case SchemeKind::random_basis_covariant: {
      if (n_bases < 1) throw InputError("n_bases must be at least 1");
      std::mt19937_64 rng(seed);
      out.randomized = true;
      RMatrix s = RMatrix::Zero(p, p), s2 = RMatrix::Zero(p, p);
      for (int k = 0; k < n_bases; ++k) {
        const RMatrix i = povm_fisher(pt, Povm::from_basis(haar_unitary(model.dim(), rng))).values;
        out.samples.push_back(i);
        s += i;
        s2 += i.cwiseProduct(i);
      }
      out.mean = s / n_bases;
      const RMatrix var = ((s2 - n_bases * out.mean.cwiseProduct(out.mean)) / std::max(1, n_bases - 1)).cwiseMax(0.0);
      out.std_error = (var / n_bases).cwiseSqrt();
      return out;
    }
  }
  out.std_error = RMatrix::Zero(p, p);
  return out;
}

std::string risk_csv_header() { return "family,scheme,estimator,N,trials,value,std_error,bound,slack"; }

std::string risk_csv_row(const std::string& family, const std::string& scheme, const std::string& estimator,
                         const RiskEstimate& r, double bound) {
  std::ostringstream os;
  os << std::setprecision(10) << family << ',' << scheme << ',' << estimator << ',' << r.n_copies << ',' << r.trials
     << ',' << r.value << ',' << r.std_error << ',' << bound << ',' << (r.value - bound);
  return os.str();
}

}  // namespace qbound
