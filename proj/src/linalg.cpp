#include "qbound/linalg.hpp"

#include <cmath>

namespace qbound {

const Numerics& Numerics::defaults() {
  static const Numerics n{};
  return n;
}

HermitianEigen eig_hermitian(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
  if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

bool is_hermitian(const CMatrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return max_abs_entry(a - a.adjoint()) <= tol;
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

double max_abs_entry(const CMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

CMatrix sqrtm_psd(const CMatrix& a) {
  auto e = eig_hermitian(a);
  RVector s = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * s.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

CMatrix abs_hermitian(const CMatrix& a) {
  auto e = eig_hermitian(a);
  RVector s = e.values.cwiseAbs();
  return e.vectors * s.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

RMatrix abs_antisymmetric(const RMatrix& a) {
  CMatrix ia = cplx(0.0, 1.0) * a.cast<cplx>();
  return abs_hermitian(ia).real();
}

RMatrix sym_sqrt(const RMatrix& g) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (g + g.transpose()));
  RVector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

RMatrix sym_inv_sqrt(const RMatrix& g) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (g + g.transpose()));
  RVector s = es.eigenvalues();
  if (s.minCoeff() <= 0.0) throw NumericalError("matrix is not positive-definite");
  s = s.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const RMatrix& s) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double min_eigenvalue(const CMatrix& h) { return eig_hermitian(h).values(0); }

double max_eigenvalue(const CMatrix& h) {
  auto v = eig_hermitian(h).values;
  return v(v.size() - 1);
}

const CMatrix& pauli(int k) {
  static const std::vector<CMatrix> sigmas = [] {
    std::vector<CMatrix> s(3, CMatrix::Zero(2, 2));
    s[0] << 0, 1, 1, 0;
    s[1] << 0, cplx(0, -1), cplx(0, 1), 0;
    s[2] << 1, 0, 0, -1;
    return s;
  }();
  return sigmas.at(static_cast<std::size_t>(k));
}

std::vector<CMatrix> gell_mann(int d) {
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(d * d - 1));
  const cplx i(0.0, 1.0);
  for (int j = 0; j < d; ++j) {
    for (int k = j + 1; k < d; ++k) {
      CMatrix s = CMatrix::Zero(d, d);
      s(j, k) = 1.0;
      s(k, j) = 1.0;
      out.push_back(s);
      CMatrix a = CMatrix::Zero(d, d);
      a(j, k) = -i;
      a(k, j) = i;
      out.push_back(a);
    }
  }
  for (int l = 1; l < d; ++l) {
    CMatrix m = CMatrix::Zero(d, d);
    const double c = std::sqrt(2.0 / (l * (l + 1.0)));
    for (int j = 0; j < l; ++j) m(j, j) = c;
    m(l, l) = -c * l;
    out.push_back(m);
  }
  return out;
}

std::vector<CMatrix> hermitian_basis(int d) {
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(d * d));
  out.push_back(CMatrix::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  for (auto& g : gell_mann(d)) out.push_back(g / std::sqrt(2.0));
  return out;
}

RVector to_coords(const CMatrix& x, const std::vector<CMatrix>& basis) {
  RVector c(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t a = 0; a < basis.size(); ++a) {
    // trace(B X) = sum_ij B_ij X_ji
    c(static_cast<Eigen::Index>(a)) = (basis[a].cwiseProduct(x.transpose())).sum().real();
  }
  return c;
}

CMatrix from_coords(const Eigen::Ref<const RVector>& x, const std::vector<CMatrix>& basis) {
  const auto d = basis.front().rows();
  CMatrix out = CMatrix::Zero(d, d);
  for (std::size_t a = 0; a < basis.size(); ++a) out += x(static_cast<Eigen::Index>(a)) * basis[a];
  return out;
}

NullSpace null_space(const RMatrix& a, double rel_tol) {
  NullSpace ns;
  const auto n = a.cols();
  if (a.rows() == 0) {
    ns.basis = RMatrix::Identity(n, n);
    return ns;
  }
  Eigen::JacobiSVD<RMatrix> svd(a, Eigen::ComputeFullV);
  const RVector& s = svd.singularValues();
  const double scale = std::max(1.0, s(0));
  int rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > rel_tol * scale) ++rank;
  ns.rank = rank;
  ns.smallest_singular_value = s(s.size() - 1);
  if (s.size() < a.rows()) ns.smallest_singular_value = 0.0;
  ns.basis = svd.matrixV().rightCols(n - rank);
  return ns;
}

}  // namespace qbound
