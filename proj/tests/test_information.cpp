#include <doctest.h>

#include <random>

#include "qbound/information.hpp"
#include "qbound/simulate.hpp"
#include "support.hpp"

using namespace qbound;

namespace {

RVector vec3(double a, double b, double c) {
  RVector v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("SLD at the centre of the Bloch ball is the Pauli matrix") {
  const auto l = sld(bloch_full(), RVector::Zero(3));
  for (int k = 0; k < 3; ++k) CHECK(oracle::max_abs(l.slds[k] - pauli(k)) < 1e-12);
}

TEST_CASE("SLD matches the eigenbasis formula and solves the Lyapunov equation") {
  std::mt19937_64 rng(21);
  for (const auto& m : {bloch_full(), bloch_equatorial(), oracle::qutrit_model(3)}) {
    for (int k = 0; k < 20; ++k) {
      const RVector t = oracle::random_in_ball(m.num_params(), m.family() == Family::affine_custom ? 0.4 : 0.9, rng);
      const auto pt = ModelPoint::at(m, t);
      const auto l = sld(pt);
      CHECK(sld_residual(pt, l) < 1e-8);
      for (std::size_t i = 0; i < l.slds.size(); ++i) {
        CHECK(oracle::max_abs(l.slds[i] - oracle::sld_eigenbasis(pt.rho, pt.derivs[i])) < 1e-8);
        CHECK(std::abs((pt.rho * l.slds[i]).trace()) < 1e-8);
      }
    }
  }
  const auto pt = ModelPoint::at(bloch_full(), vec3(0, 0, 0.5));
  CHECK(sld_residual(pt, sld(pt)) < 1e-10);
}

TEST_CASE("pure-state SLD 2 drho satisfies the SLD equation") {
  std::mt19937_64 rng(22);
  for (int d : {2, 3, 4}) {
    const auto m = pure_state(d);
    for (int k = 0; k < 10; ++k) {
      const auto pt = ModelPoint::at(m, oracle::random_in_ball(m.num_params(), 0.9, rng));
      CHECK(sld_residual(pt, sld(pt)) < 1e-10);
    }
  }
}

TEST_CASE("singular mixed state is rejected") {
  CHECK_THROWS_AS(sld(bloch_full(), vec3(0, 0, 1)), RankDeficiencyError);
  try {
    sld(bloch_full(), vec3(0, 0, 1));
  } catch (const RankDeficiencyError& e) {
    CHECK(std::abs(e.eigenvalue()) < 1e-8);
  }
}

TEST_CASE("Helstrom matrix closed forms") {
  CHECK((helstrom_matrix(bloch_full(), RVector::Zero(3)).values - RMatrix::Identity(3, 3)).norm() < 1e-12);
  const RMatrix h = helstrom_matrix(bloch_full(), vec3(0, 0, 0.6)).values;
  CHECK(h(0, 0) == doctest::Approx(1.0));
  CHECK(h(1, 1) == doctest::Approx(1.0));
  CHECK(h(2, 2) == doctest::Approx(1.0 / 0.64));
}

TEST_CASE("Helstrom matrix equals the fidelity Hessian") {
  std::mt19937_64 rng(23);
  for (const auto& m : {bloch_full(), bloch_equatorial(), pure_state(2), pure_state(3)}) {
    CAPTURE(to_string(m.family()));
    for (int k = 0; k < 20; ++k) {
      const RVector t = oracle::random_in_ball(m.num_params(), 0.8, rng);
      const RMatrix h = helstrom_matrix(m, t).values;
      const RMatrix fd = oracle::fidelity_hessian(m, t);
      CHECK((h - fd).cwiseAbs().maxCoeff() <= 1e-4 * std::max(1.0, h.cwiseAbs().maxCoeff()));
      CHECK(oracle::min_eig(h) >= -1e-9);
    }
  }
}

TEST_CASE("Helstrom quadratic approximation of the fidelity deficit") {
  const auto m = bloch_full();
  const RVector t = vec3(0.2, -0.3, 0.4);
  const RMatrix h = helstrom_matrix(m, t).values;
  const RVector dir = vec3(0.3, 0.5, -0.8).normalized();
  double prev_err = 1.0;
  for (double s : {1e-2, 1e-3}) {
    const RVector delta = s * dir;
    const double deficit = 1.0 - fidelity(m.state(t + delta), m.state(t));
    const double ratio = deficit / (0.25 * delta.dot(h * delta));
    CHECK(std::abs(ratio - 1.0) < 0.01);
    CHECK(std::abs(ratio - 1.0) < prev_err);
    prev_err = std::abs(ratio - 1.0);
  }
}

TEST_CASE("fidelity embedding metric is a quarter of H") {
  std::mt19937_64 rng(24);
  for (const auto& m : {bloch_full(), bloch_equatorial(), pure_state(2), pure_state(3)}) {
    for (int k = 0; k < 20; ++k) {
      const RVector t = oracle::random_in_ball(m.num_params(), 0.8, rng);
      const auto e = fidelity_embedding(m, t);
      const RMatrix g0 = e.scale * e.jacobian.transpose() * e.jacobian;
      CHECK((g0 - 0.25 * helstrom_matrix(m, t).values).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("POVM Fisher information examples") {
  const auto z = Povm::from_basis(CMatrix::Identity(2, 2));
  RMatrix i = povm_fisher(bloch_full(), vec3(0, 0, 0.5), z).values;
  CHECK(i(2, 2) == doctest::Approx(4.0 / 3.0));
  CHECK(i.topLeftCorner(2, 2).norm() < 1e-15);
  i = povm_fisher(bloch_full(), RVector::Zero(3), z).values;
  CHECK(i(2, 2) == doctest::Approx(1.0));

  // Bernoulli oracle by finite differences of the probabilities
  const RVector t = vec3(0.1, 0.2, 0.3);
  const double h = 1e-6;
  const RVector tp = t + vec3(0, 0, h), tm = t - vec3(0, 0, h);
  const auto m = bloch_full();
  const RVector pp = born_distribution(m.state(tp), z), pm = born_distribution(m.state(tm), z),
                p0 = born_distribution(m.state(t), z);
  double fd = 0.0;
  for (int x = 0; x < 2; ++x) fd += std::pow((pp(x) - pm(x)) / (2 * h), 2) / p0(x);
  CHECK(povm_fisher(m, t, z).values(2, 2) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("quantum dominance and additivity") {
  std::mt19937_64 rng(25);
  for (const auto& m : {bloch_full(), pure_state(2), pure_state(3), oracle::qutrit_model(3)}) {
    const RVector t = oracle::random_in_ball(m.num_params(), m.family() == Family::affine_custom ? 0.4 : 0.7, rng);
    const RMatrix h = helstrom_matrix(m, t).values;
    for (int k = 0; k < 50; ++k) {
      const RMatrix i = povm_fisher(m, t, Povm::from_basis(haar_unitary(m.dim(), rng))).values;
      CHECK(oracle::min_eig(RMatrix(h - i)) >= -1e-8);
      CHECK((i - i.transpose()).norm() < 1e-9);
    }
  }
  // two bases measured on one copy each: the product outcome has the summed information
  const auto m = bloch_full();
  const RVector t = vec3(0.1, -0.2, 0.3);
  const CMatrix u1 = pauli_eigenbasis(vec3(1, 0, 0)), u2 = pauli_eigenbasis(vec3(0, 1, 1));
  const auto pt = ModelPoint::at(m, t);
  RMatrix prod = RMatrix::Zero(3, 3);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const CMatrix e1 = u1.col(a) * u1.col(a).adjoint(), e2 = u2.col(b) * u2.col(b).adjoint();
      const double p = (pt.rho * e1).trace().real() * (pt.rho * e2).trace().real();
      RVector g(3);
      for (int i = 0; i < 3; ++i)
        g(i) = (pt.derivs[i] * e1).trace().real() * (pt.rho * e2).trace().real() +
               (pt.rho * e1).trace().real() * (pt.derivs[i] * e2).trace().real();
      prod += g * g.transpose() / p;
    }
  const RMatrix sum = povm_fisher(pt, Povm::from_basis(u1)).values + povm_fisher(pt, Povm::from_basis(u2)).values;
  CHECK((prod - sum).norm() < 1e-10);
}

TEST_CASE("zero-probability outcome policy") {
  // pure north pole measured in its own basis: p = 0 with zero gradient along theta_3 is skipped
  const auto m = bloch_full();
  CHECK_THROWS_AS(povm_fisher(ModelPoint{bloch_state(vec3(0, 0, 1)).matrix(), m.derivatives(vec3(0, 0, 1)), false},
                              Povm::from_basis(pauli_eigenbasis(vec3(0, 0, 1)))),
                  IrregularModelError);
  // a pure-state family whose derivative is orthogonal to the null outcome
  const auto pq = pure_state(2);
  const auto pt = ModelPoint::at(pq, RVector::Zero(2));
  RMatrix i;
  CHECK_NOTHROW(i = povm_fisher(pt, Povm::from_basis(CMatrix::Identity(2, 2))).values);
  CHECK(i.norm() < 1e-12);
}
