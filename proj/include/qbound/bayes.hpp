#pragma once

// Priors, quadratic losses, the integrated Holevo bound E_pi C_{G0}, the van
// Trees right-hand side and the prior regularity functional J(pi).

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbound/holevo.hpp"

namespace qbound {

/// Rotation-invariant density on the ball |theta| <= radius in R^p.
class Prior {
 public:
  using Profile = std::function<double(double)>;

  /// pi(theta) proportional to (1 - (|theta|/r0)^2)^2.
  static Prior bump(int p, double r0 = 0.9);
  /// Uniform on the ball; not boundary-zero, usable as a taper base only.
  static Prior uniform_ball(int p, double r0 = 1.0);
  /// Arbitrary radial profile f(r) and derivative f'(r); normalized here.
  static Prior radial(int p, double radius, Profile f, Profile df, std::string tag,
                      nlohmann::json params = {});

  int dim() const { return dim_; }
  double radius() const { return radius_; }
  const std::string& family() const { return tag_; }
  nlohmann::json to_json() const;

  double density(const RVector& theta) const;
  RVector log_density_gradient(const RVector& theta) const;
  RVector density_gradient(const RVector& theta) const;
  double radial_density(double r) const { return r >= radius_ ? 0.0 : f_(r) / norm_; }

  /// E_pi[h(|theta|)] by radial Gauss-Legendre quadrature.
  double radial_expectation(const std::function<double(double)>& h, int nodes = 64) const;

  RVector sample(std::mt19937_64& rng) const;

  /// Mass within 1e-3 of 1 and density < 1e-9 at the support boundary.
  /// Throws InputError naming the failed invariant.
  void check_invariants() const;

 private:
  Prior() = default;
  int dim_ = 0;
  double radius_ = 1.0;
  Profile f_, df_;
  double norm_ = 1.0;
  double radial_max_ = 0.0;  // max of f(r) r^(p-1) for rejection sampling
  std::string tag_;
  nlohmann::json params_;
};

/// Parses "bump:0.8", "uniform:1" or a JSON prior object.
Prior prior_from_spec(const std::string& spec, int p);
Prior prior_from_json(const nlohmann::json& j, int p);

/// Smooth cutoff to zero at radius R - delta and renormalization; throws
/// InputError when the renormalized prior would exceed (1 + eps) * base.
Prior prior_taper(const Prior& base, double eps, double delta);

/// Quadratic loss (psi_hat - psi)^T G~ (psi_hat - psi) in an embedding psi(theta).
struct LossSpec {
  std::function<FidelityEmbedding(const RVector&)> embed;
  std::function<RMatrix(const RVector&)> g_tilde;
  std::string tag;

  /// G0 = psi'^T G~ psi'.
  RMatrix g0(const RVector& theta) const;
  /// Fidelity deficit: G~ = scale * identity so that G0 = H/4.
  static LossSpec fidelity(const ParametricModel& model);
};

struct QuadOptions {
  int radial = 8;      ///< Gauss-Legendre radial nodes at the coarsest level
  int angular = 8;     ///< angular nodes at the coarsest level
  int refinements = 1; ///< levels beyond the coarsest; each doubles both counts
  int workers = 1;
  int mc_samples = 4000;  ///< p >= 4 falls back to Monte Carlo (per level, doubled on refinement)
  std::uint64_t seed = 11;
  HolevoOptions solver{.multistart = 0};  ///< warm starts along rays replace restarts
};

struct QuadNode {
  RVector theta;
  double weight;  ///< includes the prior density
};

/// Nodes of the product grid at `level`, grouped into rays of increasing radius
/// (warm starts follow a ray).
std::vector<std::vector<QuadNode>> quadrature_rays(const Prior& prior, const QuadOptions& q, int level);

struct IntegratedBound {
  double value = 0.0;
  double error_estimate = 0.0;
  double mean_norm = 0.0;  ///< E_pi |theta| on the same grid
  int nodes = 0;
  int solver_failures = 0;
  double integrand_min = 0.0;
  double integrand_max = 0.0;
  nlohmann::json to_json() const;
};

IntegratedBound integrated_holevo(const ParametricModel& model, const LossSpec& loss, const Prior& prior,
                                  const QuadOptions& q = {});

/// theta -> q x p matrix.
using CFunction = std::function<RMatrix(const RVector&)>;
/// theta -> average Fisher information.
using InfoFunction = std::function<RMatrix(const RVector&)>;

/// C = G~ psi' V0(theta), re-solving the Holevo problem with G0 at each call.
CFunction canonical_c(const ParametricModel& model, const LossSpec& loss, const HolevoOptions& opts = {});

struct VanTrees {
  double value = 0.0;        ///< bound on N E_pi trace(G~ V)
  double numerator = 0.0;    ///< E_pi trace(C psi'^T)
  double info_term = 0.0;    ///< E_pi trace(G~^-1 C I C^T)
  double j_term = 0.0;       ///< E_pi (C pi)'^T G~^-1 (C pi)' / pi^2
};

VanTrees van_trees_rhs(const ParametricModel& model, const Prior& prior, const LossSpec& loss,
                       const CFunction& c, double n_copies, const InfoFunction& info,
                       const QuadOptions& q = {});

struct JFunctional {
  double value = 0.0;
  std::vector<double> levels;  ///< one value per refinement level
  double drift = 0.0;          ///< relative change over the last refinement
};

/// Throws DivergenceError when the last refinement drifts by more than 5%.
JFunctional j_functional(const ParametricModel& model, const Prior& prior, const LossSpec& loss,
                         const QuadOptions& q = {});

}  // namespace qbound
