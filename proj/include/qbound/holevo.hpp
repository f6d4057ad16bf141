#pragma once

// The Holevo bound C_G = inf { trace(G V) : V >= Z(X), X feasible }, its unique
// minimizer V0, the dual bounds trace(K I) <= C^K, and the full-model embedding
// used to witness convexity of the attainable information set.

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "qbound/information.hpp"

namespace qbound {

/// Hermitian X_1..X_p with trace(rho'_i X_j) = delta_ij and trace(rho X_j) = 0.
using XCollection = std::vector<CMatrix>;

struct HolevoProblem {
  ModelPoint point;
  RMatrix weight;  // G, symmetric positive-definite

  /// Validates G and the derivative traces.
  static HolevoProblem make(ModelPoint point, RMatrix weight);
};

struct HolevoOptions {
  std::uint64_t seed = 7;
  int max_iters = 4000;  ///< per smoothing stage
  int multistart = 2;    ///< random restarts in addition to the SLD start
  std::vector<double> smoothing = {1e-2, 1e-4, 1e-6, 1e-8, 1e-10};
  double rel_tol = 1e-9;  ///< relative objective change counted as "no progress"
  int stall_iters = 5;    ///< consecutive no-progress iterations ending a stage
  double restart_scale = 0.1;

  nlohmann::json to_json() const;
  static HolevoOptions from_json(const nlohmann::json& j);
};

struct HolevoDiagnostics {
  int iterations = 0;
  int starts = 0;
  double final_smoothing = 0.0;
  double constraint_residual = 0.0;
  double smoothing_gap = 0.0;       ///< smoothed minus exact objective at the optimum
  double multistart_spread = 0.0;   ///< max pairwise |V0_a - V0_b| over starts
  double helstrom_value = 0.0;      ///< trace(G H^-1), the lower end of the sandwich
  double initial_value = 0.0;       ///< objective at the SLD initialization
};

struct HolevoSolution {
  double value = 0.0;
  XCollection x_star;
  CMatrix z_star;
  RMatrix v0;
  HolevoDiagnostics diagnostics;
};

/// Z_ij = trace(rho X_i X_j).
CMatrix z_matrix(const CMatrix& rho, const XCollection& x);

/// trace Re(G^1/2 Z G^1/2) + trace abs Im(G^1/2 Z G^1/2).
double holevo_objective(const RMatrix& g, const CMatrix& z);

/// V0 = G^-1/2 (Re(G^1/2 Z G^1/2) + abs Im(G^1/2 Z G^1/2)) G^-1/2.
RMatrix recover_v0(const RMatrix& g, const CMatrix& z);

/// max_ij |trace(rho'_i X_j) - delta_ij| together with max_j |trace(rho X_j)|.
double constraint_residual(const ModelPoint& pt, const XCollection& x);

/// Throws InfeasibleError when H is singular and ConvergenceError when the last
/// smoothing stage exhausts max_iters. `warm_start` is projected onto the
/// feasible set and used when it beats the SLD start.
HolevoSolution solve_holevo(const HolevoProblem& problem, const HolevoOptions& opts = {},
                            const XCollection* warm_start = nullptr);
HolevoSolution solve_holevo(const ParametricModel& model, const RVector& theta, const RMatrix& g,
                            const HolevoOptions& opts = {});

/// Smoothed objective trace(G Re Z) + trace sqrt(A^T A + eps), A = Im(G^1/2 Z G^1/2),
/// at free coordinates z around the SLD start (z = 0), with its analytic gradient.
struct SmoothedObjective {
  double value;
  RVector gradient;
};
SmoothedObjective smoothed_objective(const HolevoProblem& problem, const RVector& z, double eps);
/// Dimension of the free coordinates, p (d^2 - 1 - p).
Eigen::Index num_free_coordinates(const HolevoProblem& problem);

/// G = H/4 at theta.
RMatrix helstrom_quarter(const ParametricModel& model, const RVector& theta);

struct DualBound {
  RMatrix k0;    ///< V0 G V0
  double value;  ///< C^{K0} = C_G
};

/// Throws NumericalError when V0 is singular.
DualBound dual_bound(const HolevoSolution& solution, const RMatrix& g);

/// G' = I0 K0 I0 with I0 = V0^-1; re-solving with G' reproduces C_G.
RMatrix dual_weight(const HolevoSolution& solution, const DualBound& dual);

struct DualCheck {
  bool holds;
  double slack;  ///< c_k - trace(K I)
};

DualCheck check_dual(const RMatrix& k, const RMatrix& info, double c_k, double tol = 1e-7);

/// The completely unknown mixed state around rho, with derivatives `derivs`
/// (d^2-1 of them) and the unique dual collection Y.
struct FullModel {
  std::vector<CMatrix> derivs;
  XCollection y;
  CMatrix z;  ///< Z(Y), (d^2-1) x (d^2-1) Hermitian
};

/// Default parameterization d rho / d phi_a = L_a / 2 (Gell-Mann); for d=2 this
/// is the Bloch ball. Throws RankDeficiencyError for singular rho.
FullModel full_model(const CMatrix& rho);
FullModel full_model(const CMatrix& rho, const std::vector<CMatrix>& derivs);
CMatrix full_model_z(const CMatrix& rho);

/// Full model whose interest block is the submodel at `pt` and whose nuisance
/// SLDs are orthogonal to `x`, so that the interest part of Y equals `x`.
FullModel full_model_embedding(const ModelPoint& pt, const XCollection& x);

struct EmbeddingStep {
  double eps;
  double delta;
  double min_margin;  ///< smallest eigenvalue of W_eps - Z_full
  double gap;         ///< |((W_eps)^-1)_11 - V^-1|_F
  bool dominates;
};

struct EmbeddingReport {
  std::vector<EmbeddingStep> steps;
  bool monotone = true;
};

/// Builds W_eps = D_eps^-1 (diag(V, 0) + delta 1) D_eps^-1 for each eps with
/// delta = 1.01 max(0, lambda_max(D_eps Z_full D_eps - diag(V, 0))).
/// Throws NumericalError when W_eps fails to dominate Z_full.
EmbeddingReport embedding_sequence(const HolevoSolution& solution, const ModelPoint& pt,
                                   const std::vector<double>& eps_schedule,
                                   double delta_floor = 1e-12);

}  // namespace qbound
