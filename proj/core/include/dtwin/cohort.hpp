#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtwin/growth_model.hpp"
#include "dtwin/truncated_normal.hpp"

namespace dtwin {

struct ParameterPrior {
  double mean;
  double stddev;
  double lower;
  double upper;

  TruncatedNormal distribution() const { return {mean, stddev, lower, upper}; }
};

/// Independent truncated-normal priors over (rho, K, N_initial, alpha_RT).
struct PriorSpec {
  ParameterPrior rho{0.09, 0.15, 0.007, 0.25};
  ParameterPrior K{1e11, 2e10, 9e10, 1.8e11};
  ParameterPrior N_initial{1.9e10, 1.2e10, 4.7e9, 4.7e10};
  ParameterPrior alpha_RT{0.05, 0.025, 0.001, 0.1};

  std::array<ParameterPrior, 4> as_array() const { return {rho, K, N_initial, alpha_RT}; }
  bool contains(const PatientParameters& theta) const;
  void validate() const;
};

inline constexpr std::array<std::string_view, 4> kParameterNames{"rho", "K", "N_initial",
                                                                 "alpha_RT"};

struct Observation {
  double t;  // day
  double o;  // cells
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ObservationSet {
  std::vector<Observation> entries;

  /// Strictly increasing days, nonnegative counts.
  void validate() const;
  std::optional<double> at_day(double t) const;
  /// Subset restricted to the given days, in the stored order.
  ObservationSet subset(std::span<const int> days) const;
  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

struct ObservationModel {
  double sigma = 2e9;                // cells
  std::vector<int> schedule{0, 20, 27};  // days

  void validate() const;
};

/// Marks code regions that must not look at a patient's ground truth.
///
/// Calibration and optimization entry points hold one of these for their
/// whole extent; OracleTruth::reveal() throws while any guard is alive on the
/// calling thread.
class HiddenTruthGuard {
 public:
  HiddenTruthGuard();
  ~HiddenTruthGuard();
  HiddenTruthGuard(const HiddenTruthGuard&) = delete;
  HiddenTruthGuard& operator=(const HiddenTruthGuard&) = delete;

  static bool active();
};

/// Ground-truth parameters of a virtual patient, for oracle scoring only.
class OracleTruth {
 public:
  OracleTruth() = default;
  explicit OracleTruth(const PatientParameters& theta) : theta_(theta) {}

  /// Throws std::logic_error inside a HiddenTruthGuard.
  const PatientParameters& reveal() const;

 private:
  PatientParameters theta_{};
};

struct VirtualPatient {
  std::string id;
  OracleTruth theta_true;
  ObservationSet observations;
};

std::vector<PatientParameters> sample_cohort(const PriorSpec& prior, std::size_t n_patients,
                                             std::uint64_t seed);

/// Noisy observations o_t = N(t) + eps, eps ~ TN(0, sigma^2, -N(t), +inf),
/// generated under `regimen` (the standard of care during the imaging
/// window). `sigma` of zero returns the noiseless model values.
ObservationSet observe(const PatientParameters& theta_true, const FixedParameters& fixed,
                       const TreatmentRegimen& regimen, const SimulationGrid& grid,
                       const ObservationModel& model, std::uint64_t seed);

/// Ground truth plus observations for `n_patients`, one child RNG stream per
/// patient derived from `seed`. Patient ids are "P001", "P002", ...
std::vector<VirtualPatient> generate_cohort(const PriorSpec& prior, const FixedParameters& fixed,
                                            const SimulationGrid& grid,
                                            const ObservationModel& model,
                                            std::size_t n_patients, std::uint64_t seed,
                                            unsigned threads = 1);

enum class ProgressorGroup { Early, Intermediate, Late };

std::string_view to_string(ProgressorGroup g);

/// Early at <= 30 days, Late at >= 90 days, Intermediate otherwise.
/// Input is days after the end of radiotherapy; see days_after_rt().
ProgressorGroup classify_progressor(double days);

/// TTP measured from the threshold day, re-expressed relative to the end of RT.
double days_after_rt(double ttp, double threshold_day, double post_rt_day);

}  // namespace dtwin
