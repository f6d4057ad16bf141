#include <doctest.h>

#include <random>

#include "qbound/holevo.hpp"
#include "qbound/simulate.hpp"
#include "support.hpp"

using namespace qbound;

namespace {

RVector vec(std::initializer_list<double> xs) {
  RVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

void check_solution_invariants(const HolevoSolution& s, const ModelPoint& pt, const RMatrix& g) {
  CHECK(oracle::min_eig(CMatrix(s.v0.cast<cplx>() - s.z_star)) >= -1e-7);
  CHECK((g * s.v0).trace() == doctest::Approx(s.value).epsilon(1e-7));
  CHECK(holevo_objective(g, s.z_star) == doctest::Approx(s.value).epsilon(1e-6));
  CHECK(s.value >= s.diagnostics.helstrom_value - 1e-6);
  CHECK(s.value <= s.diagnostics.initial_value + 1e-9);
  CHECK(constraint_residual(pt, s.x_star) < 1e-8);
  CHECK(s.diagnostics.multistart_spread < 1e-5);
}

XCollection random_collection(int d, int p, std::mt19937_64& rng) {
  XCollection x;
  for (int j = 0; j < p; ++j) x.push_back(oracle::random_hermitian(d, rng));
  return x;
}

}  // namespace

TEST_CASE("z_matrix by direct multiplication") {
  XCollection sig{pauli(0), pauli(1), pauli(2)};
  // at the centre tr(sigma_i sigma_j)/2 = delta_ij: the antisymmetric part vanishes
  const CMatrix z0 = z_matrix(0.5 * CMatrix::Identity(2, 2), sig);
  CHECK(oracle::max_abs(z0 - CMatrix::Identity(3, 3)) < 1e-15);
  // off centre: Z_12 = tr(rho sigma_1 sigma_2) = i t
  const double t = 0.4;
  const CMatrix rho = bloch_state(vec({0, 0, t})).matrix();
  const CMatrix z = z_matrix(rho, sig);
  CHECK(std::abs(z(0, 1) - cplx(0, t)) < 1e-15);
  CHECK(std::abs(z(1, 0) - cplx(0, -t)) < 1e-15);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(z(i, j) - (rho * sig[i] * sig[j]).trace()) < 1e-15);

  std::mt19937_64 rng(1);
  const XCollection one{oracle::random_hermitian(2, rng)};
  const CMatrix z1 = z_matrix(rho, one);
  CHECK(std::abs(z1(0, 0).imag()) < 1e-15);
  CHECK(z1(0, 0).real() >= 0.0);
}

TEST_CASE("Z is operator convex in X") {
  std::mt19937_64 rng(2);
  int violations = 0;
  for (int k = 0; k < 200; ++k) {
    const int d = 2 + k % 2;
    CMatrix a = oracle::random_hermitian(d, rng);
    CMatrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    const auto x = random_collection(d, 3, rng), y = random_collection(d, 3, rng);
    XCollection mid;
    for (int j = 0; j < 3; ++j) mid.push_back(0.5 * (x[j] + y[j]));
    const CMatrix gap = 0.5 * z_matrix(rho, x) + 0.5 * z_matrix(rho, y) - z_matrix(rho, mid);
    if (oracle::min_eig(gap) < -1e-10) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("holevo_objective and recover_v0 examples") {
  CMatrix zr = CMatrix::Zero(3, 3);
  zr(0, 0) = 1.0;
  zr(1, 1) = 2.5;
  zr(2, 2) = 0.5;
  CHECK(holevo_objective(RMatrix::Identity(3, 3), zr) == doctest::Approx(4.0));
  CHECK((recover_v0(RMatrix::Identity(3, 3), zr) - zr.real()).norm() < 1e-14);

  CMatrix z(2, 2);
  z << 1.0, cplx(0, 1), cplx(0, -1), 1.0;
  CHECK(holevo_objective(RMatrix::Identity(2, 2), z) == doctest::Approx(4.0));
  CHECK((recover_v0(RMatrix::Identity(2, 2), z) - 2.0 * RMatrix::Identity(2, 2)).norm() < 1e-12);

  // monotone in the Hermitian order
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const CMatrix z1 = oracle::random_hermitian(3, rng);
    const CMatrix b = oracle::random_hermitian(3, rng);
    const CMatrix z2 = z1 + b * b.adjoint();
    const CMatrix gr = oracle::random_hermitian(3, rng);
    const RMatrix g = (gr * gr.adjoint()).real() + 0.1 * RMatrix::Identity(3, 3);
    CHECK(holevo_objective(g, z1) <= holevo_objective(g, z2) + 1e-9);
    CHECK(holevo_objective(g, z1) >= (g * z1.real()).trace() - 1e-12);
  }
}

TEST_CASE("closed-form Holevo values") {
  HolevoOptions o;
  for (double r : {0.0, 0.3, 0.5, 0.8}) {
    const RVector t = vec({0.0, r * 0.6, r * 0.8});
    const auto m = bloch_full();
    const RMatrix g = helstrom_quarter(m, t);
    const auto s = solve_holevo(m, t, g, o);
    CHECK(s.value == doctest::Approx((3.0 + 2.0 * r) / 4.0).epsilon(1e-6));
    check_solution_invariants(s, ModelPoint::at(m, t), g);
  }
  for (const RVector& t : {vec({0.0, 0.0}), vec({0.3, 0.0}), vec({-0.5, 0.5}), vec({0.1, 0.85})}) {
    const auto m = bloch_equatorial();
    const RMatrix g = helstrom_quarter(m, t);
    const auto s = solve_holevo(m, t, g, o);
    CHECK(s.value == doctest::Approx(0.5).epsilon(1e-6));
    check_solution_invariants(s, ModelPoint::at(m, t), g);
  }
  for (int d : {2, 3}) {
    const auto m = pure_state(d);
    const RVector t = RVector::Constant(m.num_params(), 0.15);
    const RMatrix g = helstrom_quarter(m, t);
    const auto s = solve_holevo(m, t, g, o);
    CHECK(s.value == doctest::Approx(d - 1.0).epsilon(1e-6));
    check_solution_invariants(s, ModelPoint::at(m, t), g);
  }
  // one-parameter submodel along the theta_3 axis with G = 1: 1/H_33 = 1 - t^2
  const auto axis = affine_custom(0.5 * CMatrix::Identity(2, 2), {0.5 * pauli(2)}, Domain::ball(1.0));
  for (double t : {0.0, 0.4, 0.9}) {
    const auto s = solve_holevo(axis, vec({t}), RMatrix::Identity(1, 1), o);
    CHECK(s.value == doctest::Approx(1.0 - t * t).epsilon(1e-9));
  }
}

TEST_CASE("non-commuting qutrit model against an SDP oracle") {
  // values from tests/oracles/holevo_sdp.py (cvxpy, SCS at eps 1e-10)
  struct Case {
    int p;
    RVector theta;
    RMatrix g;
    double holevo;
    double helstrom;
  };
  RMatrix g2(2, 2);
  g2 << 1.0, 0.3, 0.3, 2.0;
  const std::vector<Case> cases{
      {2, vec({0.05, -0.03}), RMatrix::Identity(2, 2), 7.988666667, 6.395466667},
      {2, vec({0.05, -0.03}), g2, 11.794511397, 9.595466667},
      {3, vec({0.02, 0.04, -0.05}), RMatrix::Identity(3, 3), 10.775462158, 9.189457887},
  };
  for (const auto& c : cases) {
    const auto m = oracle::qutrit_model(c.p);
    const auto s = solve_holevo(m, c.theta, c.g);
    CHECK(s.value == doctest::Approx(c.holevo).epsilon(1e-6));
    CHECK(s.diagnostics.helstrom_value == doctest::Approx(c.helstrom).epsilon(1e-8));
    // the SLD start is not optimal here: the optimizer does real work
    CHECK(s.diagnostics.initial_value > s.value + 1e-3);
    check_solution_invariants(s, ModelPoint::at(m, c.theta), c.g);
  }
}

TEST_CASE("analytic gradient of the smoothed objective matches finite differences") {
  std::mt19937_64 rng(4);
  const auto m = oracle::qutrit_model(2);
  const auto prob = HolevoProblem::make(ModelPoint::at(m, vec({0.05, -0.03})), RMatrix::Identity(2, 2));
  const auto n = num_free_coordinates(prob);
  CHECK(n == 2 * (9 - 1 - 2));
  std::normal_distribution<double> nd(0.0, 0.3);
  for (double eps : {1e-2, 1e-4}) {
    RVector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(rng);
    const auto f = smoothed_objective(prob, z, eps);
    RVector fd(n);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < n; ++i) {
      RVector zp = z, zm = z;
      zp(i) += h;
      zm(i) -= h;
      fd(i) = (smoothed_objective(prob, zp, eps).value - smoothed_objective(prob, zm, eps).value) / (2 * h);
    }
    CHECK((fd - f.gradient).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("solver errors") {
  // repeated generator: H singular, constraints infeasible
  const auto dup = affine_custom(0.5 * CMatrix::Identity(2, 2), {0.5 * pauli(2), 0.5 * pauli(2)}, Domain::ball(0.5));
  CHECK_THROWS_AS(solve_holevo(dup, RVector::Zero(2), RMatrix::Identity(2, 2)), InfeasibleError);
  // weight not positive-definite
  RMatrix bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(solve_holevo(bloch_equatorial(), RVector::Zero(2), bad), InputError);
  // starved iteration budget
  HolevoOptions o;
  o.max_iters = 2;
  o.multistart = 0;
  const auto m = oracle::qutrit_model(2);
  try {
    solve_holevo(m, vec({0.05, -0.03}), RMatrix::Identity(2, 2), o);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(std::isfinite(e.best_value()));
    CHECK(e.best_value() >= 7.988666667 - 1e-6);
  }
}

TEST_CASE("solver options JSON") {
  HolevoOptions o;
  o.seed = 99;
  o.smoothing = {1e-3, 1e-6};
  const auto back = HolevoOptions::from_json(o.to_json());
  CHECK(back.seed == 99);
  CHECK(back.smoothing == o.smoothing);
  CHECK_THROWS_AS(HolevoOptions::from_json(nlohmann::json{{"sed", 1}}), InputError);
}

TEST_CASE("determinism and covariance") {
  const auto m = oracle::qutrit_model(2);
  const RVector t = vec({0.05, -0.03});
  const RMatrix g = RMatrix::Identity(2, 2);
  const auto a = solve_holevo(m, t, g), b = solve_holevo(m, t, g);
  CHECK(a.value == b.value);
  for (double c : {0.1, 3.0}) CHECK(solve_holevo(m, t, c * g).value == doctest::Approx(c * a.value).epsilon(1e-8));

  // theta = A phi: C_{A^T G A}(phi) = C_G(theta)
  RMatrix amat(2, 2);
  amat << 1.0, 0.5, -0.3, 2.0;
  const auto& base = m.affine_basis();
  std::vector<CMatrix> nb{amat(0, 0) * base[0] + amat(1, 0) * base[1], amat(0, 1) * base[0] + amat(1, 1) * base[1]};
  const auto mp = affine_custom(m.affine_offset(), nb, Domain::ball(0.5));
  const RVector phi = amat.inverse() * t;
  RMatrix g2(2, 2);
  g2 << 1.0, 0.3, 0.3, 2.0;
  const double lhs = solve_holevo(mp, phi, amat.transpose() * g2 * amat).value;
  CHECK(lhs == doctest::Approx(solve_holevo(m, t, g2).value).epsilon(1e-6));
}

TEST_CASE("dual bounds") {
  SUBCASE("equatorial dual bound dominates random projective measurements") {
    const auto m = bloch_equatorial();
    const RVector t = vec({0.3, -0.2});
    const RMatrix g = helstrom_quarter(m, t);
    const auto s = solve_holevo(m, t, g);
    const auto dual = dual_bound(s, g);
    CHECK(dual.value == doctest::Approx(0.5).epsilon(1e-6));
    CHECK((dual.k0 - s.v0 * g * s.v0).norm() < 1e-12);
    std::mt19937_64 rng(6);
    const auto pt = ModelPoint::at(m, t);
    for (int k = 0; k < 100; ++k) {
      const RMatrix i = povm_fisher(pt, Povm::from_basis(haar_unitary(2, rng))).values;
      CHECK(check_dual(dual.k0, i, dual.value, 1e-6).holds);
    }
    // mixtures of two measurements stay below every dual bound
    const RMatrix i1 = povm_fisher(pt, Povm::from_basis(pauli_eigenbasis(vec({1, 0, 0})))).values;
    const RMatrix i2 = povm_fisher(pt, Povm::from_basis(pauli_eigenbasis(vec({0.2, 1, 0.4})))).values;
    for (double w : {0.25, 0.5, 0.75}) CHECK(check_dual(dual.k0, w * i1 + (1 - w) * i2, dual.value).holds);
    // the other direction of the duality
    const double back = solve_holevo(m, t, dual_weight(s, dual)).value;
    CHECK(back == doctest::Approx(s.value).epsilon(1e-5));
  }
  SUBCASE("one parameter: K0 = V0^2 G and trace(K0 H) = C^K0") {
    const auto axis = affine_custom(0.5 * CMatrix::Identity(2, 2), {0.5 * pauli(2)}, Domain::ball(1.0));
    const RVector t = vec({0.4});
    const RMatrix g = RMatrix::Constant(1, 1, 2.0);
    const auto s = solve_holevo(axis, t, g);
    const auto dual = dual_bound(s, g);
    CHECK(dual.k0(0, 0) == doctest::Approx(s.v0(0, 0) * s.v0(0, 0) * 2.0));
    const RMatrix h = helstrom_matrix(axis, t).values;
    CHECK((dual.k0 * h).trace() == doctest::Approx(dual.value).epsilon(1e-8));
  }
  SUBCASE("Gill-Massar through check_dual") {
    const auto m = pure_state(2);
    const RVector t = vec({0.2, -0.3});
    const RMatrix hinv = helstrom_matrix(m, t).values.inverse();
    const auto avg = empirical_fisher(m, t, MeasurementScheme::random_basis(), 500, 3);
    CHECK((hinv * avg.mean).trace() == doctest::Approx(1.0).epsilon(1e-9));
    std::mt19937_64 rng(7);
    const RMatrix fixed = povm_fisher(m, t, Povm::from_basis(haar_unitary(2, rng))).values;
    CHECK(check_dual(hinv, fixed, 1.0).holds);
    const auto zero = check_dual(hinv, RMatrix::Zero(2, 2), 1.0);
    CHECK(zero.holds);
    CHECK(zero.slack == 1.0);
  }
  SUBCASE("singular V0 is rejected") {
    HolevoSolution s;
    s.v0 = RMatrix::Zero(2, 2);
    s.v0(0, 0) = 1.0;
    CHECK_THROWS_AS(dual_bound(s, RMatrix::Identity(2, 2)), NumericalError);
  }
}

TEST_CASE("full model and its Y collection") {
  const auto fm = full_model(0.5 * CMatrix::Identity(2, 2));
  for (int k = 0; k < 3; ++k) CHECK(oracle::max_abs(fm.y[k] - pauli(k)) < 1e-12);
  for (int k = 0; k < 3; ++k) CHECK(fm.z(k, k).real() == doctest::Approx(1.0));

  std::mt19937_64 rng(8);
  const CMatrix a = oracle::random_hermitian(3, rng);
  CMatrix rho = a * a.adjoint() + 0.1 * CMatrix::Identity(3, 3);
  rho /= rho.trace().real();
  const CMatrix z = full_model_z(rho);
  CHECK(z.rows() == 8);
  CHECK(oracle::max_abs(z - z.adjoint()) < 1e-12);
  for (int k = 0; k < 8; ++k) {
    CHECK(std::abs(z(k, k).imag()) < 1e-12);
    CHECK(z(k, k).real() > 0.0);
  }
  CHECK_THROWS_AS(full_model_z(bloch_state(vec({0, 0, 1})).matrix()), RankDeficiencyError);
}

TEST_CASE("full-model embedding of a submodel") {
  const auto m = bloch_equatorial();
  const RVector t = vec({0.3, 0.0});
  const auto pt = ModelPoint::at(m, t);
  const RMatrix g = helstrom_quarter(m, t);
  const auto s = solve_holevo(m, t, g);
  const auto fm = full_model_embedding(pt, s.x_star);
  // interest block of Y is the optimal X of the submodel
  XCollection head(fm.y.begin(), fm.y.begin() + 2);
  CHECK(constraint_residual(pt, head) < 1e-8);
  for (int j = 0; j < 2; ++j) CHECK(oracle::max_abs(head[j] - s.x_star[j]) < 1e-8);

  const auto rep = embedding_sequence(s, pt, {1e-1, 1e-2, 1e-3});
  REQUIRE(rep.steps.size() == 3);
  CHECK(rep.monotone);
  for (const auto& st : rep.steps) {
    CHECK(st.dominates);
    CHECK(st.min_margin > 0.0);
  }
  CHECK(rep.steps.back().gap < 1e-3);

  // the full qubit model is its own full model
  const auto mf = bloch_full();
  const RVector tf = vec({0.1, 0.2, 0.3});
  const auto sf = solve_holevo(mf, tf, helstrom_quarter(mf, tf));
  const auto repf = embedding_sequence(sf, ModelPoint::at(mf, tf), {1e-1, 1e-2});
  for (const auto& st : repf.steps) {
    CHECK(st.dominates);
    CHECK(st.gap < 1e-6);
  }
}
