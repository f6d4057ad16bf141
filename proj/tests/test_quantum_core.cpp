#include <doctest.h>

#include <random>

#include "qbound/io.hpp"
#include "qbound/simulate.hpp"
#include "support.hpp"

using namespace qbound;

namespace {

std::vector<ParametricModel> builtin_families() {
  return {bloch_full(), bloch_equatorial(), pure_state(2), pure_state(3)};
}

CMatrix diag2(double a, double b) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

DensityMatrix random_state(int d, std::mt19937_64& rng) {
  const CMatrix a = oracle::random_hermitian(d, rng);
  const CMatrix r = a * a.adjoint();
  return DensityMatrix::from(r / r.trace().real());
}

}  // namespace

TEST_CASE("density matrix validation") {
  CHECK_NOTHROW(DensityMatrix::from(diag2(0.5, 0.5)));
  CHECK_THROWS_AS(DensityMatrix::from(diag2(0.7, 0.5)), InputError);
  CHECK_THROWS_AS(DensityMatrix::from(diag2(1.2, -0.2)), InputError);
  CMatrix nh = diag2(0.5, 0.5);
  nh(0, 1) = 0.1;
  CHECK_THROWS_AS(DensityMatrix::from(nh), InputError);
  CHECK_THROWS_AS(DensityMatrix::from(CMatrix::Identity(2, 3)), InputError);
  // a tiny negative eigenvalue inside the PSD tolerance is accepted
  CHECK_NOTHROW(DensityMatrix::from(diag2(1.0 + 1e-10, -1e-10)));
}

TEST_CASE("povm validation") {
  const CMatrix p0 = diag2(1, 0), p1 = diag2(0, 1);
  CHECK_NOTHROW(Povm::from({p0, p1}));
  CHECK_THROWS_AS(Povm::from({p0, p0}), InputError);
  CHECK_THROWS_AS(Povm::from({diag2(1.5, 0), diag2(-0.5, 1)}), InputError);
  CHECK(Povm::from_basis(CMatrix::Identity(2, 2)).size() == 2);
}

TEST_CASE("bloch_state examples") {
  RVector t = RVector::Zero(3);
  CHECK(oracle::max_abs(bloch_state(t).matrix() - 0.5 * CMatrix::Identity(2, 2)) < 1e-15);
  t << 0, 0, 1;
  CHECK(oracle::max_abs(bloch_state(t).matrix() - diag2(1, 0)) < 1e-15);
  t << 1, 0, 0;
  CMatrix expect(2, 2);
  expect << 0.5, 0.5, 0.5, 0.5;
  CHECK(oracle::max_abs(bloch_state(t).matrix() - expect) < 1e-15);
  t << 0.8, 0.7, 0;
  CHECK_THROWS_AS(bloch_state(t), DomainError);
}

TEST_CASE("born distribution") {
  const auto z = Povm::from_basis(CMatrix::Identity(2, 2));
  const RVector p = born_distribution(DensityMatrix::from(diag2(1, 0)), z);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(0.0));

  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const CMatrix u = haar_unitary(2, rng);
    const RVector q = born_distribution(DensityMatrix::from(0.5 * CMatrix::Identity(2, 2)), Povm::from_basis(u));
    CHECK(q(0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  // pure state in a random basis: |<psi_x|phi>|^2
  for (int k = 0; k < 20; ++k) {
    const CMatrix u = haar_unitary(3, rng);
    const CVector phi = haar_unitary(3, rng).col(0);
    const RVector q = born_distribution(DensityMatrix::from(phi * phi.adjoint()), Povm::from_basis(u));
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int x = 0; x < 3; ++x) CHECK(q(x) == doctest::Approx(std::norm(u.col(x).dot(phi))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(born_distribution(DensityMatrix::from(diag2(1, 0)), Povm::from_basis(CMatrix::Identity(3, 3))),
                  DimensionError);
}

TEST_CASE("fidelity agrees with the definition and the Bloch closed form") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const RVector a = oracle::random_in_ball(3, 1.0, rng), b = oracle::random_in_ball(3, 1.0, rng);
    const auto ra = bloch_state(a), rb = bloch_state(b);
    const double closed = 0.5 * (1.0 + a.dot(b) + std::sqrt(1.0 - a.squaredNorm()) * std::sqrt(1.0 - b.squaredNorm()));
    CHECK(fidelity(ra, rb) == doctest::Approx(closed).epsilon(1e-10));
    CHECK(fidelity(ra, rb) == doctest::Approx(fidelity(rb, ra)).epsilon(1e-9));
    CHECK(fidelity(ra, ra) == doctest::Approx(1.0).epsilon(1e-10));
  }
  for (int k = 0; k < 20; ++k) {
    const auto a = random_state(3, rng), b = random_state(3, rng);
    CHECK(fidelity(a, b) == doctest::Approx(oracle::fidelity(a.matrix(), b.matrix())).epsilon(1e-9));
  }
  CHECK(fidelity(DensityMatrix::from(diag2(1, 0)), DensityMatrix::from(diag2(0, 1))) == doctest::Approx(0.0));
}

TEST_CASE("fidelity never exceeds the classical fidelity of a measurement") {
  std::mt19937_64 rng(8);
  int violations = 0;
  for (int k = 0; k < 50; ++k) {
    const auto a = bloch_state(oracle::random_in_ball(3, 1.0, rng));
    const auto b = bloch_state(oracle::random_in_ball(3, 1.0, rng));
    const double f = fidelity(a, b);
    for (int m = 0; m < 200; ++m) {
      const auto povm = Povm::from_basis(haar_unitary(2, rng));
      if (f > classical_fidelity(born_distribution(a, povm), born_distribution(b, povm)) + 1e-9) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("builtin families: valid states, traceless and consistent derivatives") {
  std::mt19937_64 rng(11);
  for (const auto& m : builtin_families()) {
    CAPTURE(to_string(m.family()));
    for (int k = 0; k < 100; ++k) {
      const RVector t = oracle::random_in_ball(m.num_params(), 0.95, rng);
      CHECK_NOTHROW(m.state(t));
      const auto an = m.derivatives(t);
      const auto fd = oracle::state_derivatives(m, t);
      for (std::size_t i = 0; i < an.size(); ++i) {
        CHECK(std::abs(an[i].trace()) < 1e-9);
        CHECK(oracle::max_abs(an[i] - fd[i]) <= 1e-6 * std::max(1.0, oracle::max_abs(an[i])));
      }
    }
  }
}

TEST_CASE("fidelity embedding identities") {
  std::mt19937_64 rng(13);
  RVector zero = RVector::Zero(3);
  const auto e0 = fidelity_embedding(bloch_full(), zero);
  RVector expect(4);
  expect << 0, 0, 0, 1;
  CHECK((e0.psi - expect).norm() < 1e-15);

  for (const auto& m : builtin_families()) {
    CAPTURE(to_string(m.family()));
    for (int k = 0; k < 30; ++k) {
      const RVector a = oracle::random_in_ball(m.num_params(), 0.95, rng);
      const RVector b = oracle::random_in_ball(m.num_params(), 0.95, rng);
      const auto ea = fidelity_embedding(m, a), eb = fidelity_embedding(m, b);
      const double deficit = 1.0 - oracle::fidelity(m.state(a).matrix(), m.state(b).matrix());
      CHECK(std::abs(deficit - ea.scale * (ea.psi - eb.psi).squaredNorm()) < 1e-10);
      if (!m.is_pure()) CHECK(ea.psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
      // Jacobian against central differences
      for (int i = 0; i < m.num_params(); ++i) {
        RVector e = RVector::Zero(m.num_params());
        e(i) = 1e-6;
        const RVector fd = (fidelity_embedding(m, a + e).psi - fidelity_embedding(m, a - e).psi) / 2e-6;
        CHECK((fd - ea.jacobian.col(i)).norm() < 1e-6 * std::max(1.0, fd.norm()));
      }
    }
  }
  CMatrix rho0 = 0.5 * CMatrix::Identity(2, 2);
  const auto custom = affine_custom(rho0, {0.5 * pauli(2)}, Domain::ball(1.0));
  CHECK_THROWS_AS(fidelity_embedding(custom, RVector::Zero(1)), InputError);
}

TEST_CASE("model JSON round trip and rejection of unknown keys") {
  const auto m = oracle::qutrit_model(2);
  const json j = model_to_json(m);
  const auto back = model_from_json(j);
  RVector t(2);
  t << 0.1, -0.2;
  CHECK(oracle::max_abs(back.state(t).matrix() - m.state(t).matrix()) < 1e-15);

  json bad = j;
  bad["colour"] = "blue";
  CHECK_THROWS_AS(model_from_json(bad), InputError);
  CHECK_THROWS_AS(model_from_json(json{{"family", "no_such_family"}}), InputError);
  CHECK(model_from_json(json{{"family", "pure_dim_d"}, {"dim", 4}}).num_params() == 6);

  json not_traceless = j;
  not_traceless["basis"][0] = cmatrix_to_json(CMatrix::Identity(3, 3));
  CHECK_THROWS_AS(model_from_json(not_traceless), InputError);
}

TEST_CASE("domain checks") {
  const auto m = bloch_full();
  RVector out(3);
  out << 0.9, 0.9, 0.0;
  CHECK_THROWS_AS(m.state(out), DomainError);
  CHECK_THROWS_AS(m.state(RVector::Zero(2)), DimensionError);
}
