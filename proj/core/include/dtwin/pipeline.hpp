#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtwin/artifacts.hpp"
#include "dtwin/config.hpp"

namespace dtwin {

/// Flat-file layout of one run, rooted at <out>/<config hash>.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path cohort() const { return root / "cohort.json"; }
  std::filesystem::path records() const { return root / "twins.json"; }
  std::filesystem::path ensemble(const std::string& id) const {
    return root / "ensembles" / (id + ".json");
  }
  std::filesystem::path front(const std::string& id) const {
    return root / "fronts" / (id + ".json");
  }
  std::filesystem::path front_csv() const { return root / "pareto_front.csv"; }
  std::filesystem::path survival_csv(const std::string& arm) const;
  std::filesystem::path logrank() const { return root / "logrank.json"; }
  std::filesystem::path summary() const { return root / "summary.json"; }
};

RunPaths run_paths(const std::filesystem::path& out, const RunConfig& cfg);

/// An artifact was produced under a different configuration.
class ConfigMismatch : public std::runtime_error {
 public:
  ConfigMismatch(const std::string& what, std::vector<std::string> diff);
  const std::vector<std::string>& diff() const { return diff_; }

 private:
  std::vector<std::string> diff_;
};

/// Creates the run directory and its config.json, or checks that an existing
/// one matches `cfg`.
RunPaths prepare_run(const std::filesystem::path& out, const RunConfig& cfg);

/// Opens an existing run directory; `cfg` must match its config.json.
RunPaths open_run(const std::filesystem::path& root, const RunConfig& cfg);

// Pure per-stage computations. Every patient uses its own seed stream keyed
// by its index, so results do not depend on thread count or stage order.
CohortArtifact make_cohort(const RunConfig& cfg);
PosteriorEnsemble calibrate_patient(const RunConfig& cfg, const VirtualPatient& patient,
                                    std::size_t index);
ParetoFront optimize_patient(const RunConfig& cfg, const PosteriorEnsemble& ensemble,
                             std::size_t index);
OptimizationConfig patient_optimization(const RunConfig& cfg, std::size_t index);

/// Arm labels: "OUU:<d_max>" per grid entry, then "SOC".
std::vector<std::string> arm_labels(const RunConfig& cfg);

// File-backed stages. Each reads its inputs from the run directory, checks
// their config hash, and rewrites its outputs deterministically.
void stage_cohort(const RunConfig& cfg, const RunPaths& paths);
void stage_calibrate(const RunConfig& cfg, const RunPaths& paths,
                     const std::optional<std::string>& patient_id = std::nullopt);
void stage_optimize(const RunConfig& cfg, const RunPaths& paths,
                    const std::optional<std::string>& patient_id = std::nullopt);

struct ArmSurvival {
  std::string arm;
  SurvivalInput input;
  SurvivalCurve curve;
  SurvivalBand band;
  LogrankResult versus_soc;
};

/// Survival curves, bands and logrank against the standard of care for the
/// requested arms (all arms when empty).
std::vector<ArmSurvival> stage_survival(const RunConfig& cfg, const RunPaths& paths,
                                        const std::vector<std::string>& arms = {});

struct PatientOutcome {
  std::string id;
  std::string group;  // progressor group under the standard of care
  double soc_ttp = 0.0;
  std::optional<double> ouu60_ttp;
  std::optional<double> delta_ttp;
  DoseReduction reduction;
  double max_r_hat = 0.0;
  bool converged = true;
  double posterior_var_N_initial = 0.0;
};

struct ReproduceResult {
  RunPaths paths;
  std::vector<PatientOutcome> patients;
  std::vector<ArmSurvival> arms;
  std::string summary_json;
};

/// Every stage end to end, then summary.json with grouped medians, dose
/// reductions and logrank results per arm.
ReproduceResult reproduce(const RunConfig& cfg, const std::filesystem::path& out);

/// Summary of stored artifacts (no recomputation apart from survival).
ReproduceResult summarize(const RunConfig& cfg, const RunPaths& paths);

/// What-if evaluation of one regimen on a patient's posterior.
struct WhatIf {
  TreatmentRegimen regimen;
  double alpha = 0.95;
  int n_mc = 1000;
  std::uint64_t seed = 0;
  double ttp_superquantile = 0.0;
  double ttp_quantile = 0.0;
  double total_dose = 0.0;
  std::vector<int> histogram;  // 1-day bins [k, k + 1) below the horizon
  int end_of_simulation = 0;         // draws that never progressed
  bool converged = true;
};

WhatIf evaluate_what_if(const RunConfig& cfg, const PosteriorEnsemble& ensemble,
                        const TreatmentRegimen& regimen, double alpha, int n_mc,
                        std::uint64_t seed);
std::string serialize(const WhatIf& w);

}  // namespace dtwin
