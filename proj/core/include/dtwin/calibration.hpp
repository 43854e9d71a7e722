#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dtwin/cohort.hpp"
#include "dtwin/growth_model.hpp"
#include "dtwin/truncated_normal.hpp"

namespace dtwin {

/// Step 1: the day-0 image turns into an informative prior on N_initial,
/// TN(o, sigma^2, max(0, o - 2 sigma), o + 2 sigma).
TruncatedNormal step1_update_initial_burden(double o_day0, double sigma);

/// Priors used by the MCMC step: Table-style priors for rho, K, alpha_RT and
/// the Step-1 law for N_initial, clipped to the population bounds.
struct EffectivePrior {
  std::array<TruncatedNormal, 4> marginals;

  static EffectivePrior from(const PriorSpec& prior,
                             const std::optional<TruncatedNormal>& step1 = std::nullopt);

  bool contains(const PatientParameters& theta) const;
  double log_density(const PatientParameters& theta) const;
  PatientParameters sample(Rng& rng) const;
};

struct LikelihoodSpec {
  double sigma = 2e9;
  std::vector<int> days{20, 27};  // observations assimilated in Step 2

  void validate() const;
};

/// Everything the log-posterior depends on.
struct CalibrationProblem {
  ObservationSet observations;  // only the assimilated days are used
  EffectivePrior prior;
  LikelihoodSpec likelihood;
  FixedParameters fixed;
  TreatmentRegimen regimen = TreatmentRegimen::standard_of_care();
  SimulationGrid grid;
};

/// log TN(0, sigma^2, -model, inf) density of the residual obs - model.
double observation_log_likelihood(double obs, double model, double sigma);

double log_likelihood(const PatientParameters& theta, const CalibrationProblem& problem);

/// Unnormalized log posterior; -infinity outside the prior support.
double log_posterior(const PatientParameters& theta, const CalibrationProblem& problem);

/// Metropolis acceptance probability min(1, exp(proposed - current)).
double acceptance_probability(double log_target_current, double log_target_proposed);

struct McmcConfig {
  int chains = 4;
  int samples_per_chain = 10'000;  // post burn-in iterations per chain
  int thin = 10;
  double burn_in_fraction = 0.2;   // adaptation phase, relative to samples_per_chain
  double target_acceptance = 0.234;
  double r_hat_threshold = 1.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  int burn_in() const;
  int retained_per_chain() const { return samples_per_chain / thin; }
  void validate() const;
};

struct Diagnostics {
  std::array<double, 4> r_hat{};
  std::array<double, 4> ess{};
  std::vector<double> acceptance;  // per chain, after burn-in
  double r_hat_threshold = 1.05;
  bool converged = true;
};

/// Equal-weight posterior samples pooled over chains in chain order.
struct PosteriorEnsemble {
  std::vector<PatientParameters> samples;
  Diagnostics diagnostics;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::array<double, 4> mean() const;
  std::array<double, 4> variance() const;
};

/// Split R-hat over equal-length chains of one scalar.
double split_r_hat(const std::vector<std::vector<double>>& chains);

/// Multi-chain effective sample size (Geyer initial positive sequence).
double effective_sample_size(const std::vector<std::vector<double>>& chains);

/// Adaptive random-walk Metropolis in logit space.
///
/// Each chain starts from an independent prior draw, adapts its proposal
/// covariance and global scale toward the target acceptance during burn-in,
/// then runs with the proposal frozen. Non-convergence (any R-hat above the
/// threshold) is flagged in the diagnostics, never thrown.
PosteriorEnsemble run_mcmc(const CalibrationProblem& problem, const McmcConfig& config);

/// Two-step calibration of one patient's observations: Step 1 from the
/// day-0 entry, Step 2 MCMC over `likelihood.days`.
PosteriorEnsemble calibrate(const ObservationSet& observations, const PriorSpec& prior,
                            const LikelihoodSpec& likelihood, const FixedParameters& fixed,
                            const SimulationGrid& grid, const McmcConfig& config);

}  // namespace dtwin
