#pragma once

// nlohmann mappings for core types. Private to the library so the vendored
// json.hpp never leaks into installed headers.

#include <json.hpp>

#include "dtwin/calibration.hpp"
#include "dtwin/cohort.hpp"
#include "dtwin/growth_model.hpp"
#include "dtwin/optimizer.hpp"
#include "dtwin/survival.hpp"

namespace dtwin {

using nlohmann::json;

inline void to_json(json& j, const PatientParameters& p) {
  j = {{"rho", p.rho}, {"K", p.K}, {"N_initial", p.N_initial}, {"alpha_RT", p.alpha_RT}};
}
inline void from_json(const json& j, PatientParameters& p) {
  p.rho = j.at("rho").get<double>();
  p.K = j.at("K").get<double>();
  p.N_initial = j.at("N_initial").get<double>();
  p.alpha_RT = j.at("alpha_RT").get<double>();
}

inline void to_json(json& j, const Observation& o) { j = {{"t", o.t}, {"o", o.o}}; }
inline void from_json(const json& j, Observation& o) {
  o.t = j.at("t").get<double>();
  o.o = j.at("o").get<double>();
}

inline void to_json(json& j, const Diagnostics& d) {
  j = {{"r_hat", d.r_hat},
       {"ess", d.ess},
       {"acceptance", d.acceptance},
       {"r_hat_threshold", d.r_hat_threshold},
       {"converged", d.converged}};
}
inline void from_json(const json& j, Diagnostics& d) {
  d.r_hat = j.at("r_hat").get<std::array<double, 4>>();
  d.ess = j.at("ess").get<std::array<double, 4>>();
  d.acceptance = j.at("acceptance").get<std::vector<double>>();
  d.r_hat_threshold = j.at("r_hat_threshold").get<double>();
  d.converged = j.at("converged").get<bool>();
}

inline void to_json(json& j, const ParetoPoint& p) {
  j = {{"d_max", p.d_max},
       {"u", p.regimen.weekly_doses},
       {"total_dose", p.total_dose},
       {"objective", p.objective},
       {"ttp_superquantile", p.ttp_superquantile},
       {"ttp_superquantile_se", p.ttp_superquantile_se},
       {"ttp_quantile", p.ttp_quantile},
       {"restarts", p.restarts},
       {"evaluations", p.evaluations},
       {"failed", p.failed}};
  if (p.failed) j["error"] = p.error;
}
inline void from_json(const json& j, ParetoPoint& p) {
  p.d_max = j.at("d_max").get<double>();
  p.regimen = TreatmentRegimen::standard_of_care();
  p.regimen.weekly_doses = j.at("u").get<std::array<double, TreatmentRegimen::kWeeks>>();
  p.total_dose = j.at("total_dose").get<double>();
  p.objective = j.at("objective").get<double>();
  p.ttp_superquantile = j.at("ttp_superquantile").get<double>();
  p.ttp_superquantile_se = j.at("ttp_superquantile_se").get<double>();
  p.ttp_quantile = j.at("ttp_quantile").get<double>();
  p.restarts = j.at("restarts").get<int>();
  p.evaluations = j.at("evaluations").get<int>();
  p.failed = j.at("failed").get<bool>();
  p.error = j.value("error", std::string{});
}

inline void to_json(json& j, const LogrankResult& r) {
  j = {{"statistic", r.statistic}, {"p_value", r.p_value}, {"n_a", r.n_a}, {"n_b", r.n_b}};
}

}  // namespace dtwin
