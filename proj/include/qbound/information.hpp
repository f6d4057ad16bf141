#pragma once

// Symmetric logarithmic derivatives, the Helstrom matrix and classical Fisher
// information of measurement outcomes.

#include <vector>

#include "qbound/quantum_core.hpp"

namespace qbound {

/// p x p real symmetric information matrix.
struct InfoMatrix {
  enum class Kind { helstrom, povm_fisher };
  RMatrix values;
  Kind kind = Kind::povm_fisher;
};

/// SLDs lambda_i solving rho L + L rho = 2 d rho / d theta_i.
struct SldSet {
  std::vector<CMatrix> slds;
};

/// Point data of a model: rho(theta) and its partial derivatives.
struct ModelPoint {
  CMatrix rho;
  std::vector<CMatrix> derivs;
  bool pure = false;

  static ModelPoint at(const ParametricModel& model, const RVector& theta);
  int dim() const { return static_cast<int>(rho.rows()); }
  int num_params() const { return static_cast<int>(derivs.size()); }
};

/// Mixed states: solved as a d^2 x d^2 real system in the orthonormal Hermitian
/// basis. Pure states: L = 2 rho'. Throws RankDeficiencyError for singular
/// mixed states.
SldSet sld(const ModelPoint& pt, const Numerics& num = Numerics::defaults());
SldSet sld(const ParametricModel& model, const RVector& theta);

/// H_ij = Re trace(rho lambda_i lambda_j).
InfoMatrix helstrom_matrix(const ModelPoint& pt, const SldSet& l);
InfoMatrix helstrom_matrix(const ParametricModel& model, const RVector& theta);

/// I_ij = sum_x (d_i p_x)(d_j p_x) / p_x. Outcomes with p_x and its gradient both
/// below 1e-12 are skipped; p_x ~ 0 with |d p_x| > 1e-8 throws IrregularModelError.
InfoMatrix povm_fisher(const ModelPoint& pt, const Povm& m);
InfoMatrix povm_fisher(const ParametricModel& model, const RVector& theta, const Povm& m);

/// max_ij |rho L_i + L_i rho - 2 rho'_i|.
double sld_residual(const ModelPoint& pt, const SldSet& l);

}  // namespace qbound
