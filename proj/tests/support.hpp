#pragma once

// Independent reference computations used as test oracles. None of these call
// the library's SLD, Helstrom or fidelity code paths.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qbound/linalg.hpp"
#include "qbound/quantum_core.hpp"

namespace oracle {

using qbound::CMatrix;
using qbound::cplx;
using qbound::RMatrix;
using qbound::RVector;

inline CMatrix psd_sqrt(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
  const RVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Uhlmann fidelity straight from the definition.
inline double fidelity(const CMatrix& a, const CMatrix& b) {
  // pure a = |psi><psi|: sqrt(a) = a, so the definition reduces to <psi|b|psi>
  if (std::abs((a * a).trace().real() - 1.0) < 1e-12) return (a * b).trace().real();
  const CMatrix s = psd_sqrt(a);
  const CMatrix inner = s * b * s;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (inner + inner.adjoint()));
  const double t = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return t * t;
}

/// H = -2 d^2/dDelta^2 Fid(rho(theta), rho(theta + Delta)) at Delta = 0, by
/// central differences.
inline RMatrix fidelity_hessian(const qbound::ParametricModel& m, const RVector& theta, double h = 1e-3) {
  const auto p = theta.size();
  const CMatrix rho = m.state(theta).matrix();
  auto f = [&](const RVector& delta) { return fidelity(rho, m.state(theta + delta).matrix()); };
  RMatrix hess(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      RVector ei = RVector::Zero(p), ej = RVector::Zero(p);
      ei(i) = h;
      ej(j) = h;
      hess(i, j) = (f(ei + ej) - f(ei - ej) - f(ej - ei) + f(-ei - ej)) / (4.0 * h * h);
    }
  return -2.0 * hess;
}

/// Central-difference derivative of the state.
inline std::vector<CMatrix> state_derivatives(const qbound::ParametricModel& m, const RVector& theta, double h = 1e-5) {
  std::vector<CMatrix> out;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    RVector e = RVector::Zero(theta.size());
    e(i) = h;
    out.push_back((m.state(theta + e).matrix() - m.state(theta - e).matrix()) / (2.0 * h));
  }
  return out;
}

/// SLD from the eigenbasis formula L_jk = 2 <j|drho|k> / (l_j + l_k).
inline CMatrix sld_eigenbasis(const CMatrix& rho, const CMatrix& drho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
  const CMatrix& u = es.eigenvectors();
  const CMatrix d = u.adjoint() * drho * u;
  CMatrix l = CMatrix::Zero(rho.rows(), rho.cols());
  for (Eigen::Index j = 0; j < rho.rows(); ++j)
    for (Eigen::Index k = 0; k < rho.cols(); ++k) {
      const double s = es.eigenvalues()(j) + es.eigenvalues()(k);
      if (s > 1e-14) l(j, k) = 2.0 * d(j, k) / s;
    }
  return u * l * u.adjoint();
}

/// Uniform point in the ball of radius r in R^p.
inline RVector random_in_ball(int p, double r, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RVector v(p);
  for (int i = 0; i < p; ++i) v(i) = n(rng);
  return v.normalized() * r * std::pow(u(rng), 1.0 / p);
}

inline CMatrix random_hermitian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = cplx(n(rng), n(rng));
  return 0.5 * (a + a.adjoint());
}

inline double max_abs(const CMatrix& a) { return a.cwiseAbs().maxCoeff(); }

inline double min_eig(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()));
  return es.eigenvalues().minCoeff();
}

inline double min_eig(const RMatrix& a) {
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (a + a.transpose()));
  return es.eigenvalues().minCoeff();
}

/// The qutrit test model rho0 + theta_1 B_1 + ... with non-commuting generators.
inline qbound::ParametricModel qutrit_model(int p) {
  CMatrix rho0 = CMatrix::Zero(3, 3);
  rho0(0, 0) = 0.5;
  rho0(1, 1) = 0.3;
  rho0(2, 2) = 0.2;
  CMatrix b1 = CMatrix::Zero(3, 3), b2 = CMatrix::Zero(3, 3), b3 = CMatrix::Zero(3, 3);
  b1(0, 1) = b1(1, 0) = 0.25;
  b2(0, 1) = cplx(0.0, -0.25);
  b2(1, 0) = cplx(0.0, 0.25);
  b3(0, 2) = b3(2, 0) = 0.25;
  std::vector<CMatrix> basis{b1, b2, b3};
  basis.resize(static_cast<std::size_t>(p));
  return qbound::affine_custom(rho0, basis, qbound::Domain::ball(0.5));
}

}  // namespace oracle
