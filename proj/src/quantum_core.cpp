#include "qbound/quantum_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qbound/linalg.hpp"

namespace qbound {

DensityMatrix DensityMatrix::from(const CMatrix& m, const Numerics& num) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DimensionError("density matrix must be square");
  if (!m.allFinite()) throw InputError("density matrix has non-finite entries");
  if (!is_hermitian(m, std::max(num.hermitian_tol, 1e-12 * max_abs_entry(m))))
    throw InputError("density matrix is not Hermitian");
  CMatrix h = hermitian_part(m);
  const double tr = h.trace().real();
  if (std::abs(tr - 1.0) > num.trace_tol) {
    std::ostringstream os;
    os << "density matrix trace " << tr << " differs from 1";
    throw InputError(os.str());
  }
  const double lo = min_eigenvalue(h);
  if (lo < -num.psd_tol) {
    std::ostringstream os;
    os << "density matrix has negative eigenvalue " << lo;
    throw InputError(os.str());
  }
  return DensityMatrix(std::move(h));
}

Povm Povm::from(std::vector<CMatrix> elements, std::vector<std::string> labels,
                const Numerics& num) {
  if (elements.empty()) throw InputError("POVM needs at least one element");
  const auto d = elements.front().rows();
  CMatrix sum = CMatrix::Zero(d, d);
  for (auto& e : elements) {
    if (e.rows() != d || e.cols() != d) throw DimensionError("POVM elements differ in dimension");
    if (!is_hermitian(e, 1e-10)) throw InputError("POVM element is not Hermitian");
    e = hermitian_part(e);
    if (min_eigenvalue(e) < -num.psd_tol) throw InputError("POVM element is not PSD");
    sum += e;
  }
  if (max_abs_entry(sum - CMatrix::Identity(d, d)) > 1e-9)
    throw InputError("POVM elements do not sum to the identity");
  if (labels.empty()) {
    for (std::size_t k = 0; k < elements.size(); ++k) labels.push_back(std::to_string(k));
  }
  if (labels.size() != elements.size()) throw InputError("POVM label count mismatch");
  return Povm(std::move(elements), std::move(labels));
}

Povm Povm::from_basis(const CMatrix& basis) {
  std::vector<CMatrix> e;
  for (Eigen::Index k = 0; k < basis.cols(); ++k) e.push_back(basis.col(k) * basis.col(k).adjoint());
  return from(std::move(e));
}

std::string to_string(Family f) {
  switch (f) {
    case Family::bloch_full: return "bloch_full";
    case Family::bloch_equatorial: return "bloch_equatorial";
    case Family::pure_qubit: return "pure_qubit";
    case Family::pure_dim_d: return "pure_dim_d";
    case Family::affine_custom: return "affine_custom";
  }
  return "unknown";
}

Family parse_family(const std::string& tag) {
  for (auto f : {Family::bloch_full, Family::bloch_equatorial, Family::pure_qubit,
                 Family::pure_dim_d, Family::affine_custom})
    if (to_string(f) == tag) return f;
  throw InputError("unknown model family '" + tag + "'");
}

Domain Domain::ball(double r) {
  if (!(r > 0.0)) throw InputError("ball radius must be positive");
  Domain d;
  d.kind = Kind::ball;
  d.radius = r;
  return d;
}

Domain Domain::box(RVector lo, RVector hi) {
  if (lo.size() != hi.size() || (hi - lo).minCoeff() < 0.0) throw InputError("invalid box domain");
  Domain d;
  d.kind = Kind::box;
  d.lower = std::move(lo);
  d.upper = std::move(hi);
  return d;
}

bool Domain::contains(const RVector& theta, double slack) const {
  if (kind == Kind::ball) return theta.norm() <= radius + slack;
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (theta(i) < lower(i) - slack || theta(i) > upper(i) + slack) return false;
  return true;
}

RVector Domain::project(const RVector& theta) const {
  if (kind == Kind::ball) {
    const double n = theta.norm();
    return n > radius ? RVector(theta * (radius / n)) : theta;
  }
  return theta.cwiseMax(lower).cwiseMin(upper);
}

ParametricModel::ParametricModel(Family family, int dim, int num_params, Domain domain,
                                 StateFn state, DerivFn derivs)
    : family_(family),
      dim_(dim),
      num_params_(num_params),
      domain_(std::move(domain)),
      state_fn_(std::move(state)),
      deriv_fn_(std::move(derivs)) {}

void ParametricModel::check_domain(const RVector& theta) const {
  if (theta.size() != num_params_) {
    std::ostringstream os;
    os << to_string(family_) << " expects " << num_params_ << " parameters, got " << theta.size();
    throw DimensionError(os.str());
  }
  if (!theta.allFinite() || !domain_.contains(theta)) {
    std::ostringstream os;
    os << "parameter outside the domain of " << to_string(family_) << " (|theta| = "
       << theta.norm() << ")";
    throw DomainError(os.str());
  }
}

DensityMatrix ParametricModel::state(const RVector& theta) const {
  check_domain(theta);
  return DensityMatrix::from(state_fn_(theta));
}

std::vector<CMatrix> ParametricModel::derivatives(const RVector& theta) const {
  check_domain(theta);
  return deriv_fn_(theta);
}

namespace {

CMatrix bloch_matrix(const RVector& theta) {
  CMatrix rho = 0.5 * CMatrix::Identity(2, 2);
  for (Eigen::Index k = 0; k < theta.size(); ++k) rho += 0.5 * theta(k) * pauli(static_cast<int>(k));
  return rho;
}

}  // namespace

ParametricModel bloch_full() {
  return ParametricModel(
      Family::bloch_full, 2, 3, Domain::ball(1.0), bloch_matrix,
      [](const RVector&) { return std::vector<CMatrix>{0.5 * pauli(0), 0.5 * pauli(1), 0.5 * pauli(2)}; });
}

ParametricModel bloch_equatorial() {
  return ParametricModel(
      Family::bloch_equatorial, 2, 2, Domain::ball(1.0), bloch_matrix,
      [](const RVector&) { return std::vector<CMatrix>{0.5 * pauli(0), 0.5 * pauli(1)}; });
}

CVector pure_state_vector(const RVector& theta, int d) {
  CVector phi(d);
  const double r2 = theta.squaredNorm();
  if (r2 > 1.0 + 1e-12) throw DomainError("pure-state coordinates exceed the unit ball");
  phi(0) = std::sqrt(std::max(0.0, 1.0 - r2));
  for (int k = 1; k < d; ++k) phi(k) = cplx(theta(2 * (k - 1)), theta(2 * (k - 1) + 1));
  return phi;
}

ParametricModel pure_state(int d) {
  if (d < 2 || d > 8) throw InputError("pure_dim_d supports 2 <= d <= 8");
  const int p = 2 * (d - 1);
  auto state = [d](const RVector& theta) {
    CVector phi = pure_state_vector(theta, d);
    return CMatrix(phi * phi.adjoint());
  };
  auto derivs = [d, p](const RVector& theta) {
    CVector phi = pure_state_vector(theta, d);
    const double a0 = phi(0).real();
    if (a0 <= 0.0) throw DomainError("pure-state derivatives undefined where the first amplitude vanishes");
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
      const int k = i / 2 + 1;
      CVector dphi = CVector::Zero(d);
      dphi(k) = (i % 2 == 0) ? cplx(1.0, 0.0) : cplx(0.0, 1.0);
      dphi(0) = -theta(i) / a0;
      out.push_back(dphi * phi.adjoint() + phi * dphi.adjoint());
    }
    return out;
  };
  return ParametricModel(d == 2 ? Family::pure_qubit : Family::pure_dim_d, d, p, Domain::ball(1.0),
                         state, derivs);
}

ParametricModel affine_custom(const CMatrix& rho0, const std::vector<CMatrix>& basis,
                              Domain domain) {
  const auto ref = DensityMatrix::from(rho0);
  const int d = ref.dim();
  if (basis.empty()) throw InputError("affine_custom needs at least one basis matrix");
  for (const auto& b : basis) {
    if (b.rows() != d || b.cols() != d) throw DimensionError("affine_custom basis dimension mismatch");
    if (!is_hermitian(b, 1e-12)) throw InputError("affine_custom basis matrix is not Hermitian");
    if (std::abs(b.trace()) > 1e-9) throw InputError("affine_custom basis matrix is not traceless");
  }
  if (domain.kind == Domain::Kind::box && domain.lower.size() != static_cast<Eigen::Index>(basis.size()))
    throw InputError("affine_custom box dimension mismatch");
  const CMatrix r0 = ref.matrix();
  auto state = [r0, basis](const RVector& theta) {
    CMatrix rho = r0;
    for (std::size_t i = 0; i < basis.size(); ++i) rho += theta(static_cast<Eigen::Index>(i)) * basis[i];
    return rho;
  };
  ParametricModel m(Family::affine_custom, d, static_cast<int>(basis.size()), std::move(domain), state,
                    [basis](const RVector&) { return basis; });
  m.rho0_ = r0;
  m.basis_ = basis;
  return m;
}

DensityMatrix bloch_state(const RVector& theta) {
  if (theta.size() != 3) throw DimensionError("Bloch vector must have 3 components");
  if (theta.norm() > 1.0 + 1e-12) throw DomainError("Bloch vector outside the unit ball");
  return DensityMatrix::from(bloch_matrix(theta));
}

RVector born_distribution(const DensityMatrix& rho, const Povm& m, const Numerics& num) {
  if (rho.dim() != m.dim()) throw DimensionError("state and POVM dimensions differ");
  RVector p(static_cast<Eigen::Index>(m.size()));
  for (std::size_t x = 0; x < m.size(); ++x) {
    double px = (rho.matrix().cwiseProduct(m.elements()[x].transpose())).sum().real();
    if (px < -num.prob_clip) throw NumericalError("negative outcome probability");
    p(static_cast<Eigen::Index>(x)) = std::max(0.0, px);
  }
  return p;
}

namespace {

double purity(const CMatrix& r) { return (r.cwiseProduct(r.transpose())).sum().real(); }

double overlap(const CMatrix& a, const CMatrix& b) {
  return (a.cwiseProduct(b.transpose())).sum().real();
}

}  // namespace

double fidelity(const DensityMatrix& rho_hat, const DensityMatrix& rho, const Numerics& num) {
  if (rho_hat.dim() != rho.dim()) throw DimensionError("fidelity of states of different dimension");
  const CMatrix& a = rho_hat.matrix();
  const CMatrix& b = rho.matrix();
  double f;
  if (rho.dim() == 2) {
    // Exact for qubits: trace(a b) + 2 sqrt(det a det b).
    const double da = std::max(0.0, a.determinant().real());
    const double db = std::max(0.0, b.determinant().real());
    f = overlap(a, b) + 2.0 * std::sqrt(da * db);
  } else if (purity(b) > 1.0 - 1e-12 || purity(a) > 1.0 - 1e-12) {
    f = overlap(a, b);
  } else {
    const CMatrix s = sqrtm_psd(b);
    const CMatrix inner = s * a * s;
    const auto e = eig_hermitian(inner);
    if (e.values(0) < -num.psd_tol) throw NumericalError("fidelity: inner matrix is not PSD");
    const double t = e.values.cwiseMax(0.0).cwiseSqrt().sum();
    f = t * t;
  }
  return std::clamp(f, 0.0, 1.0);
}

double classical_fidelity(const RVector& p, const RVector& q) {
  if (p.size() != q.size()) throw DimensionError("distributions of different length");
  const double a = (p.cwiseMax(0.0).cwiseSqrt().cwiseProduct(q.cwiseMax(0.0).cwiseSqrt())).sum();
  return a * a;
}

FidelityEmbedding fidelity_embedding(const ParametricModel& model, const RVector& theta) {
  FidelityEmbedding out;
  const int p = model.num_params();
  switch (model.family()) {
    case Family::bloch_full:
    case Family::bloch_equatorial: {
      const double r2 = theta.squaredNorm();
      if (theta.size() != p || r2 > 1.0 + 1e-12) throw DomainError("Bloch parameter outside the unit ball");
      const double s = std::sqrt(std::max(0.0, 1.0 - r2));
      out.psi.resize(p + 1);
      out.psi.head(p) = theta;
      out.psi(p) = s;
      out.jacobian = RMatrix::Zero(p + 1, p);
      out.jacobian.topRows(p) = RMatrix::Identity(p, p);
      if (s > 0.0) {
        out.jacobian.row(p) = -theta.transpose() / s;
      } else {
        out.jacobian.row(p).setConstant(std::numeric_limits<double>::infinity());
      }
      out.scale = 0.25;
      return out;
    }
    case Family::pure_qubit:
    case Family::pure_dim_d: {
      const int d = model.dim();
      const CMatrix rho = model.state(theta).matrix();
      const auto der = model.derivatives(theta);
      out.psi.resize(2 * d * d);
      out.jacobian.resize(2 * d * d, p);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          const int idx = 2 * (i * d + j);
          out.psi(idx) = rho(i, j).real();
          out.psi(idx + 1) = rho(i, j).imag();
          for (int k = 0; k < p; ++k) {
            out.jacobian(idx, k) = der[static_cast<std::size_t>(k)](i, j).real();
            out.jacobian(idx + 1, k) = der[static_cast<std::size_t>(k)](i, j).imag();
          }
        }
      }
      out.scale = 0.5;
      return out;
    }
    case Family::affine_custom: break;
  }
  throw InputError("family " + to_string(model.family()) + " has no quadratic fidelity embedding");
}

}  // namespace qbound
