#include "dtwin/cohort.hpp"

#include <cmath>
#include <fmt/format.h>
#include <stdexcept>

#include "dtwin/parallel.hpp"

namespace dtwin {

namespace {
thread_local int hidden_truth_depth = 0;
}

HiddenTruthGuard::HiddenTruthGuard() { ++hidden_truth_depth; }
HiddenTruthGuard::~HiddenTruthGuard() { --hidden_truth_depth; }
bool HiddenTruthGuard::active() { return hidden_truth_depth > 0; }

const PatientParameters& OracleTruth::reveal() const {
  if (HiddenTruthGuard::active())
    throw std::logic_error("ground-truth parameters read inside a hidden-truth region");
  return theta_;
}

bool PriorSpec::contains(const PatientParameters& theta) const {
  const auto priors = as_array();
  const auto values = theta.as_array();
  for (std::size_t i = 0; i < 4; ++i)
    if (!(values[i] >= priors[i].lower && values[i] <= priors[i].upper)) return false;
  return true;
}

void PriorSpec::validate() const {
  for (const auto& p : as_array()) (void)p.distribution();
}

void ObservationSet::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!(entries[i].o >= 0.0) || !std::isfinite(entries[i].o))
      throw std::invalid_argument("observations must be nonnegative");
    if (i > 0 && !(entries[i].t > entries[i - 1].t))
      throw std::invalid_argument("observation times must be strictly increasing");
  }
}

std::optional<double> ObservationSet::at_day(double t) const {
  for (const auto& e : entries)
    if (e.t == t) return e.o;
  return std::nullopt;
}

ObservationSet ObservationSet::subset(std::span<const int> days) const {
  ObservationSet out;
  for (const auto& e : entries)
    for (int d : days)
      if (e.t == d) out.entries.push_back(e);
  return out;
}

void ObservationModel::validate() const {
  if (!(sigma >= 0.0)) throw std::invalid_argument("observation sigma must be nonnegative");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1])
      throw std::invalid_argument("observation schedule must be strictly increasing");
}

std::vector<PatientParameters> sample_cohort(const PriorSpec& prior, std::size_t n_patients,
                                             std::uint64_t seed) {
  if (n_patients < 1) throw std::invalid_argument("cohort needs at least one patient");
  const auto priors = prior.as_array();
  const std::array<TruncatedNormal, 4> dists{
      priors[0].distribution(), priors[1].distribution(), priors[2].distribution(),
      priors[3].distribution()};
  std::vector<PatientParameters> out(n_patients);
  for (std::size_t i = 0; i < n_patients; ++i) {
    Rng rng = make_rng(seed, "cohort.theta", i);
    std::array<double, 4> v{};
    for (std::size_t j = 0; j < 4; ++j) v[j] = dists[j].sample(rng);
    out[i] = PatientParameters::from_array(v);
  }
  return out;
}

ObservationSet observe(const PatientParameters& theta_true, const FixedParameters& fixed,
                       const TreatmentRegimen& regimen, const SimulationGrid& grid,
                       const ObservationModel& model, std::uint64_t seed) {
  model.validate();
  const auto truth = state_at_days(theta_true, fixed, regimen, grid, model.schedule);
  Rng rng(seed);
  ObservationSet obs;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double o = truth[i];
    if (model.sigma > 0.0) {
      const TruncatedNormal noise(0.0, model.sigma, -truth[i], TruncatedNormal::inf);
      o = std::max(0.0, truth[i] + noise.sample(rng));
    }
    obs.entries.push_back({static_cast<double>(model.schedule[i]), o});
  }
  return obs;
}

std::vector<VirtualPatient> generate_cohort(const PriorSpec& prior, const FixedParameters& fixed,
                                            const SimulationGrid& grid,
                                            const ObservationModel& model,
                                            std::size_t n_patients, std::uint64_t seed,
                                            unsigned threads) {
  const auto thetas = sample_cohort(prior, n_patients, seed);
  const auto soc = TreatmentRegimen::standard_of_care();
  std::vector<VirtualPatient> patients(n_patients);
  parallel_for(n_patients, threads, [&](std::size_t i) {
    patients[i].id = fmt::format("P{:03d}", i + 1);
    patients[i].theta_true = OracleTruth(thetas[i]);
    patients[i].observations =
        observe(thetas[i], fixed, soc, grid, model, derive_seed(seed, "cohort.noise", i));
  });
  return patients;
}

std::string_view to_string(ProgressorGroup g) {
  switch (g) {
    case ProgressorGroup::Early: return "Early";
    case ProgressorGroup::Intermediate: return "Intermediate";
    case ProgressorGroup::Late: return "Late";
  }
  return "?";
}

ProgressorGroup classify_progressor(double days) {
  if (!(days >= 0.0 && days <= 132.0))
    throw std::out_of_range(fmt::format("progression time {} outside [0, 132] days", days));
  if (days <= 30.0) return ProgressorGroup::Early;
  if (days >= 90.0) return ProgressorGroup::Late;
  return ProgressorGroup::Intermediate;
}

double days_after_rt(double ttp, double threshold_day, double post_rt_day) {
  return std::max(0.0, ttp - (post_rt_day - threshold_day));
}

}  // namespace dtwin
