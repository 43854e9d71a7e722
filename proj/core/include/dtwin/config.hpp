#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dtwin/calibration.hpp"
#include "dtwin/cohort.hpp"
#include "dtwin/growth_model.hpp"
#include "dtwin/optimizer.hpp"
#include "dtwin/risk.hpp"

namespace dtwin {

enum class Scale { desk, paper };

std::string_view to_string(Scale s);
Scale parse_scale(std::string_view s);

/// Everything that determines a pipeline run. Thread count is an execution
/// detail: it is excluded from the JSON form and the hash, because results do
/// not depend on it.
struct RunConfig {
  Scale scale = Scale::desk;
  std::uint64_t seed = 20240101;
  int cohort_size = 20;
  PriorSpec prior;
  ObservationModel observation;
  FixedParameters fixed;
  SimulationGrid grid;
  TTPConfig ttp;
  LikelihoodSpec likelihood;
  McmcConfig mcmc;
  RiskConfig risk;
  OptimizationConfig optimization;
  int n_boot = 100;  // survival band replicates
  double matched_tolerance_days = 1.0;
  unsigned threads = 1;

  /// desk: 20 patients, 4 x 10k MCMC, n_mc 1000, 5 restarts.
  /// paper: 100 patients, 4 x 100k MCMC, n_mc 5000, 20 restarts.
  static RunConfig preset(Scale scale);

  ForwardContext forward() const { return {fixed, grid, ttp}; }
  void validate() const;

  /// Canonical JSON (stable key order, shortest round-trip numbers).
  std::string to_json() const;
  /// Keys absent from `text` keep the values of the preset named by its
  /// "scale" entry (desk when absent), or of `scale_override` when given.
  /// Unknown keys are rejected.
  static RunConfig from_json(std::string_view text,
                             std::optional<Scale> scale_override = std::nullopt);

  /// 16 hex digits of FNV-1a over to_json().
  std::string hash() const;
};

/// "path: old -> new" for every leaf that differs.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

class ConfigNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load_config(const std::filesystem::path& path,
                      std::optional<Scale> scale_override = std::nullopt);

}  // namespace dtwin
