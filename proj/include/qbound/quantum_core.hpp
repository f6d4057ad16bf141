#pragma once

// States, measurements and the parametric model families.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qbound/numerics.hpp"

namespace qbound {

/// A validated density matrix: Hermitian, PSD and unit trace within Numerics tolerances.
class DensityMatrix {
 public:
  /// Throws InputError when the invariants fail.
  static DensityMatrix from(const CMatrix& m, const Numerics& num = Numerics::defaults());

  const CMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

/// Finite-outcome POVM.
class Povm {
 public:
  static Povm from(std::vector<CMatrix> elements, std::vector<std::string> labels = {},
                   const Numerics& num = Numerics::defaults());
  /// Projective measurement onto the orthonormal columns of `basis`.
  static Povm from_basis(const CMatrix& basis);

  int dim() const { return static_cast<int>(elements_.front().rows()); }
  std::size_t size() const { return elements_.size(); }
  const std::vector<CMatrix>& elements() const { return elements_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  Povm(std::vector<CMatrix> e, std::vector<std::string> l)
      : elements_(std::move(e)), labels_(std::move(l)) {}
  std::vector<CMatrix> elements_;
  std::vector<std::string> labels_;
};

enum class Family { bloch_full, bloch_equatorial, pure_qubit, pure_dim_d, affine_custom };

std::string to_string(Family f);
Family parse_family(const std::string& tag);

/// Parameter domain: a closed ball about the origin or an axis-aligned box.
struct Domain {
  enum class Kind { ball, box };
  Kind kind = Kind::ball;
  double radius = 1.0;
  RVector lower, upper;  // box only

  static Domain ball(double r);
  static Domain box(RVector lo, RVector hi);
  bool contains(const RVector& theta, double slack = 1e-12) const;
  /// Nearest point of the domain (Euclidean projection).
  RVector project(const RVector& theta) const;
};

/// theta -> rho(theta) with exact partial derivatives.
class ParametricModel {
 public:
  using StateFn = std::function<CMatrix(const RVector&)>;
  using DerivFn = std::function<std::vector<CMatrix>(const RVector&)>;

  ParametricModel(Family family, int dim, int num_params, Domain domain, StateFn state,
                  DerivFn derivs);

  Family family() const { return family_; }
  int dim() const { return dim_; }
  int num_params() const { return num_params_; }
  const Domain& domain() const { return domain_; }
  bool is_pure() const { return family_ == Family::pure_qubit || family_ == Family::pure_dim_d; }
  bool is_affine() const { return !is_pure(); }

  /// Throws DomainError outside the domain.
  DensityMatrix state(const RVector& theta) const;
  std::vector<CMatrix> derivatives(const RVector& theta) const;
  RVector reference_point() const { return RVector::Zero(num_params_); }

  // affine_custom only: rho(theta) = rho0 + sum theta_i B_i.
  const CMatrix& affine_offset() const { return rho0_; }
  const std::vector<CMatrix>& affine_basis() const { return basis_; }

  friend ParametricModel affine_custom(const CMatrix& rho0, const std::vector<CMatrix>& basis,
                                       Domain domain);

 private:
  void check_domain(const RVector& theta) const;

  Family family_;
  int dim_;
  int num_params_;
  Domain domain_;
  StateFn state_fn_;
  DerivFn deriv_fn_;
  CMatrix rho0_;
  std::vector<CMatrix> basis_;
};

// Builtin families.
ParametricModel bloch_full();
ParametricModel bloch_equatorial();
/// Pure states in C^d with 2(d-1) real coordinates (Re z_k, Im z_k), k=1..d-1;
/// the first amplitude is sqrt(1-|z|^2) >= 0. d=2 is tagged pure_qubit.
ParametricModel pure_state(int d);
/// rho0 + sum theta_i B_i; B_i must be traceless Hermitian, rho0 a density matrix.
ParametricModel affine_custom(const CMatrix& rho0, const std::vector<CMatrix>& basis,
                              Domain domain);

/// State vector of the pure family at theta (first amplitude real, non-negative).
CVector pure_state_vector(const RVector& theta, int d);

DensityMatrix bloch_state(const RVector& theta);

/// p_x = trace(rho M_x), tiny negatives clipped to 0.
RVector born_distribution(const DensityMatrix& rho, const Povm& m,
                          const Numerics& num = Numerics::defaults());

/// (trace sqrt(rho^1/2 rho_hat rho^1/2))^2.
double fidelity(const DensityMatrix& rho_hat, const DensityMatrix& rho,
                const Numerics& num = Numerics::defaults());

/// Squared Hellinger affinity between two probability vectors.
double classical_fidelity(const RVector& p, const RVector& q);

/// Real embedding psi(theta) in which the fidelity deficit is an exact quadratic:
/// 1 - Fid = scale * |psi_hat - psi|^2, scale = 1/4 (Bloch families) or 1/2 (pure).
struct FidelityEmbedding {
  RVector psi;
  RMatrix jacobian;  // q x p
  double scale = 0.25;
};

FidelityEmbedding fidelity_embedding(const ParametricModel& model, const RVector& theta);

}  // namespace qbound
