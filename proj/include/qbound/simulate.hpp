#pragma once

// Separable measurement schemes, outcome sampling, estimators and Monte Carlo
// estimates of the Bayes risk and of the average Fisher information.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbound/bayes.hpp"

namespace qbound {

enum class SchemeKind { fixed_basis, alternating_bases, random_basis_covariant, two_step_adaptive };

std::string to_string(SchemeKind kind);
/// Accepts the enum names and the short forms fixed, alternating, random-basis, two-step.
SchemeKind parse_scheme(const std::string& s);

/// A basis is a unitary whose columns are the measurement vectors; outcome k
/// corresponds to column k.
struct MeasurementScheme {
  SchemeKind kind = SchemeKind::fixed_basis;
  std::vector<CMatrix> bases;  ///< fixed: one; alternating and two-step stage 1: cycled per copy
  double first_fraction = 0.0;

  static MeasurementScheme fixed(CMatrix basis);
  static MeasurementScheme alternating(std::vector<CMatrix> bases);
  static MeasurementScheme random_basis();
  /// Default bases for `kind`: computational basis; Pauli bases (qubits) or
  /// computational + Fourier (d > 2); two-step with first fraction 0.1.
  static MeasurementScheme standard(SchemeKind kind, const ParametricModel& model);
};

/// Stage 1 cycles the informationally complete Pauli bases of the model over
/// ceil(fraction N) copies; stage 2 uses bases adapted to the stage-1 MLE.
/// Qubit models only.
MeasurementScheme two_step_scheme(const ParametricModel& model, double first_fraction);

/// Eigenbasis of n . sigma, +1 eigenvector first.
CMatrix pauli_eigenbasis(const RVector& n);
/// Haar-random unitary (QR of a complex Ginibre matrix with phase correction).
CMatrix haar_unitary(int d, std::mt19937_64& rng);

struct Sample {
  std::vector<CMatrix> bases;
  std::vector<int> basis_index;  ///< per copy
  std::vector<int> outcome;      ///< per copy
  int stage_one = 0;             ///< copies measured before adaptation

  std::size_t size() const { return outcome.size(); }
  /// The first n copies, with only the bases they use.
  Sample prefix(std::size_t n) const;
};

Sample sample_outcomes(const ParametricModel& model, const RVector& theta, const MeasurementScheme& scheme,
                       int n_copies, std::mt19937_64& rng);
Sample sample_outcomes(const ParametricModel& model, const RVector& theta, const MeasurementScheme& scheme,
                       int n_copies, std::uint64_t seed);

/// Stage-2 bases for a qubit model whose state is estimated at theta_hat:
/// Pauli bases along the estimated Bloch direction and its orthogonal
/// complement (only the orthogonal ones for pure states, only the in-plane
/// ones for the equatorial model).
std::vector<CMatrix> adapted_bases(const ParametricModel& model, const RVector& theta_hat);
/// adapted_bases at the MLE of `stage_one`; a function of stage-1 data only.
std::vector<CMatrix> stage_two_bases(const ParametricModel& model, const Sample& stage_one);

/// One distinct measurement vector with its observed count.
struct LikelihoodTerm {
  CVector v;
  double count;
};
std::vector<LikelihoodTerm> likelihood_terms(const Sample& s);
double log_likelihood(const ParametricModel& model, const std::vector<LikelihoodTerm>& terms, const RVector& theta);

struct Estimate {
  RVector theta;
  bool boundary = false;  ///< the likelihood is maximized on the boundary of the domain
  double log_likelihood = 0.0;
  int iterations = 0;
};

struct MleOptions {
  double tol = 1e-8;
  int max_iters = 200;
  int multistart = 3;  ///< pure families; affine families have a concave likelihood
  std::uint64_t seed = 5;
};

Estimate mle_estimate(const Sample& s, const ParametricModel& model, const MleOptions& opts = {});

struct BayesMeanOptions {
  int samples = 400;       ///< importance samples around the MLE
  double inflation = 2.0;  ///< proposal covariance = inflation * observed information^-1
  MleOptions mle;
};

/// Posterior mean of theta by importance sampling from a Gaussian around the MLE.
Estimate bayes_mean_estimate(const Sample& s, const ParametricModel& model, const Prior& prior,
                             std::uint64_t seed, const BayesMeanOptions& opts = {});

enum class EstimatorKind { mle, bayes_mean };
std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& s);

/// (data, true theta, per-trial seed) -> estimate. The true theta is only for
/// test oracles; shipped estimators ignore it.
using EstimatorFn = std::function<Estimate(const Sample&, const RVector&, std::uint64_t)>;
EstimatorFn make_estimator(EstimatorKind kind, const ParametricModel& model, const Prior& prior);

/// loss(theta_hat, theta); defaults to the fidelity deficit.
using LossFn = std::function<double(const RVector&, const RVector&)>;
LossFn fidelity_loss(const ParametricModel& model);

struct RiskEstimate {
  int n_copies = 0;
  int trials = 0;
  double value = 0.0;      ///< N * mean loss
  double std_error = 0.0;  ///< N * sample std / sqrt(trials)
  double mean_loss = 0.0;
  double max_loss = 0.0;
  int failures = 0;
  int boundary_estimates = 0;
  nlohmann::json to_json() const;
};

/// Per-trial generators are seeded from (seed, trial index), so the result does
/// not depend on the number of workers. Throws NumericalError when more than 1%
/// of the estimator calls fail.
RiskEstimate bayes_risk_mc(const ParametricModel& model, const Prior& prior, const MeasurementScheme& scheme,
                           const EstimatorFn& estimator, int n_copies, int trials, std::uint64_t seed,
                           int workers = 1, const LossFn& loss = {});

struct EmpiricalInfo {
  RMatrix mean;
  RMatrix std_error;  ///< entrywise; zero for deterministic schemes
  std::vector<RMatrix> samples;
  bool randomized = false;

  /// Mean and standard error of a scalar functional of the per-basis informations.
  std::pair<double, double> functional(const std::function<double(const RMatrix&)>& f) const;
};

/// Average Fisher information per copy. Random schemes average n_bases Haar
/// bases; two-step mixes stage 1 and the stage-2 bases adapted at the true theta.
EmpiricalInfo empirical_fisher(const ParametricModel& model, const RVector& theta, const MeasurementScheme& scheme,
                               int n_bases = 2000, std::uint64_t seed = 1);

std::string risk_csv_header();
std::string risk_csv_row(const std::string& family, const std::string& scheme, const std::string& estimator,
                         const RiskEstimate& r, double bound);

}  // namespace qbound
