#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dtwin/calibration.hpp"
#include "dtwin/cohort.hpp"
#include "dtwin/optimizer.hpp"
#include "dtwin/survival.hpp"

namespace dtwin {

/// Virtual cohort with its ground truth in an "oracle" section.
struct CohortArtifact {
  std::string config_hash;
  std::vector<VirtualPatient> patients;
};

struct EnsembleArtifact {
  std::string patient_id;
  std::string config_hash;
  PosteriorEnsemble ensemble;
};

struct FrontArtifact {
  std::string patient_id;
  std::string config_hash;
  ParetoFront front;
};

// Serialized forms are canonical: parse followed by serialize reproduces
// the input byte for byte.
std::string serialize(const CohortArtifact& a);
std::string serialize(const EnsembleArtifact& a);
std::string serialize(const FrontArtifact& a);
std::string serialize(const LogrankResult& r);

CohortArtifact parse_cohort(std::string_view text);
EnsembleArtifact parse_ensemble(std::string_view text);
FrontArtifact parse_front(std::string_view text);

/// Columns patient_id, d_max_gy, u1..u6, total_dose_gy,
/// ttp_superquantile_days, objective; failed points are skipped.
void write_front_csv(std::ostream& out, const std::vector<FrontArtifact>& fronts);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory, then renames.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace dtwin
