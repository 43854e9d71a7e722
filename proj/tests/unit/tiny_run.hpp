#pragma once

// Small configuration that exercises every stage in seconds.

#include <filesystem>
#include <string>

#include "dtwin/config.hpp"

namespace dtwin::testing {

inline const char* kTinyConfig = R"({
  "seed": 4242,
  "cohort_size": 3,
  "mcmc": {"samples_per_chain": 1000, "thin": 5},
  "optimization": {"d_max_grid": [40, 60], "restarts": 2, "max_evals_per_restart": 20,
                   "n_mc": 400, "report_n_mc": 400},
  "survival": {"n_boot": 10}
})";

inline RunConfig tiny_config(unsigned threads = 1) {
  auto c = RunConfig::from_json(kTinyConfig);
  c.threads = threads;
  return c;
}

inline std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dtwin_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace dtwin::testing
