#pragma once

// Dense Hermitian helpers: eigendecompositions, PSD square roots, matrix
// absolute values and the operator bases used to turn matrix equations into
// small real linear systems.

#include <vector>

#include "qbound/numerics.hpp"

namespace qbound {

struct HermitianEigen {
  RVector values;   // ascending
  CMatrix vectors;  // columns
};

HermitianEigen eig_hermitian(const CMatrix& a);

bool is_hermitian(const CMatrix& a, double tol);
CMatrix hermitian_part(const CMatrix& a);
double max_abs_entry(const CMatrix& a);

/// Square root of a PSD matrix; eigenvalues below zero are clipped to 0.
CMatrix sqrtm_psd(const CMatrix& a);

/// Absolute value |A| of a Hermitian matrix.
CMatrix abs_hermitian(const CMatrix& a);

/// For real antisymmetric A, the real PSD matrix sqrt(A^T A), computed via the
/// Hermitian matrix iA so that its spectrum is exact.
RMatrix abs_antisymmetric(const RMatrix& a);

/// Symmetric square root and inverse square root of a real SPD matrix.
RMatrix sym_sqrt(const RMatrix& g);
RMatrix sym_inv_sqrt(const RMatrix& g);
double min_eigenvalue(const RMatrix& s);
double min_eigenvalue(const CMatrix& h);
double max_eigenvalue(const CMatrix& h);

/// Pauli matrices sigma_1..sigma_3 (index 0..2).
const CMatrix& pauli(int k);

/// Generalized Gell-Mann matrices for dimension d: d^2-1 traceless Hermitian
/// matrices with trace(L_a L_b) = 2 delta_ab. Ordered as (sym, antisym) per
/// pair j<k, then the diagonal ones, so that d=2 gives sigma_1, sigma_2, sigma_3.
std::vector<CMatrix> gell_mann(int d);

/// Orthonormal Hermitian basis {1/sqrt(d), L_a/sqrt(2)} under trace(A B).
std::vector<CMatrix> hermitian_basis(int d);

/// Real coordinates x_a = trace(B_a X) of a Hermitian X in an orthonormal basis.
RVector to_coords(const CMatrix& x, const std::vector<CMatrix>& basis);
CMatrix from_coords(const Eigen::Ref<const RVector>& x,
                    const std::vector<CMatrix>& basis);

/// Orthonormal basis of the null space of a (wide) real matrix, and its rank.
struct NullSpace {
  RMatrix basis;  // columns
  int rank = 0;
  double smallest_singular_value = 0.0;
};
NullSpace null_space(const RMatrix& a, double rel_tol = 1e-10);

}  // namespace qbound
