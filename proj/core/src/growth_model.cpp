#include "dtwin/growth_model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace dtwin {

void FixedParameters::validate() const {
  if (!(S_C > 0.0 && S_C <= 1.0))
    throw std::invalid_argument("S_C must lie in (0, 1]");
  if (!(alpha_beta_ratio > 0.0))
    throw std::invalid_argument("alpha/beta ratio must be positive");
}

TreatmentRegimen TreatmentRegimen::with_tail(std::span<const double> tail) {
  if (tail.size() != kWeeks - 1)
    throw std::invalid_argument("regimen tail must hold doses for weeks 2..6");
  TreatmentRegimen r;
  r.weekly_doses[0] = kFirstWeekDose;
  std::copy(tail.begin(), tail.end(), r.weekly_doses.begin() + 1);
  return r;
}

std::array<double, TreatmentRegimen::kWeeks - 1> TreatmentRegimen::tail() const {
  std::array<double, kWeeks - 1> t{};
  std::copy(weekly_doses.begin() + 1, weekly_doses.end(), t.begin());
  return t;
}

double TreatmentRegimen::l1_norm() const {
  double s = 0.0;
  for (double u : weekly_doses) s += std::abs(u);
  return s;
}

int TreatmentRegimen::last_treatment_day() const {
  return treatment_start_day + 7 * static_cast<int>(kWeeks - 1) +
         treatment_days_per_week - 1;
}

void TreatmentRegimen::validate(Validation mode) const {
  if (treatment_start_day < 0)
    throw std::invalid_argument("treatment start day must be nonnegative");
  if (treatment_days_per_week < 0 || treatment_days_per_week > 7)
    throw std::invalid_argument("treatment days per week must be in [0, 7]");
  for (std::size_t i = 0; i < kWeeks; ++i) {
    const double u = weekly_doses[i];
    if (!std::isfinite(u) || u < 0.0 || u > kMaxDose)
      throw std::invalid_argument(
          fmt::format("weekly dose u{} = {} outside [0, {}] Gy/day", i + 1, u, kMaxDose));
  }
  if (mode == Validation::strict) {
    if (weekly_doses[0] != kFirstWeekDose)
      throw std::invalid_argument(
          fmt::format("first-week dose must be {} Gy/day", kFirstWeekDose));
    if (!chemo)
      throw std::invalid_argument("chemotherapy can only be disabled in relaxed mode");
  }
}

int SimulationGrid::steps_per_day() const {
  const double per_day = 1.0 / dt;
  const double rounded = std::round(per_day);
  if (!(dt > 0.0) || rounded < 1.0 || std::abs(per_day - rounded) > 1e-9 * rounded)
    throw std::invalid_argument(
        fmt::format("time step {} does not evenly divide one day", dt));
  return static_cast<int>(rounded);
}

int SimulationGrid::days() const {
  const double rounded = std::round(t_end);
  if (!(t_end > 0.0) || std::abs(t_end - rounded) > 1e-9)
    throw std::invalid_argument("horizon must be a positive whole number of days");
  return static_cast<int>(rounded);
}

void SimulationGrid::validate() const {
  (void)steps_per_day();
  (void)days();
}

double Trajectory::at_day(int day, const SimulationGrid& grid) const {
  const auto k = static_cast<std::size_t>(day) * static_cast<std::size_t>(grid.steps_per_day());
  if (day < 0 || k >= values.size()) throw std::out_of_range("day outside trajectory");
  return values[k];
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t_days,N_cells\n";
  for (std::size_t k = 0; k < values.size(); ++k)
    out << fmt::format("{},{}\n", times[k], values[k]);
}

void validate(const PatientParameters& theta, Validation mode) {
  const auto check = [&](double v, const char* name) {
    const bool ok = mode == Validation::strict ? v > 0.0 : v >= 0.0;
    if (!std::isfinite(v) || !ok)
      throw std::invalid_argument(fmt::format("parameter {} = {} must be {}", name, v,
                                              mode == Validation::strict
                                                  ? "positive"
                                                  : "nonnegative"));
  };
  check(theta.rho, "rho");
  check(theta.N_initial, "N_initial");
  check(theta.alpha_RT, "alpha_RT");
  if (!(theta.K > 0.0) || !std::isfinite(theta.K))
    throw std::invalid_argument("carrying capacity K must be positive");
}

double surviving_fraction(double dose, double alpha_RT, const FixedParameters& fixed,
                          bool chemo_active) {
  if (!(dose >= 0.0)) throw std::invalid_argument("dose must be nonnegative");
  const double beta = fixed.beta_RT(alpha_RT);
  const double rt = std::exp(-alpha_RT * dose - beta * dose * dose);
  return chemo_active ? fixed.S_C * rt : rt;
}

std::vector<TreatmentEvent> event_schedule(const TreatmentRegimen& regimen,
                                           const SimulationGrid& grid) {
  regimen.validate(Validation::relaxed);
  const int days = grid.days();
  std::vector<TreatmentEvent> events;
  events.reserve(TreatmentRegimen::kWeeks *
                 static_cast<std::size_t>(regimen.treatment_days_per_week));
  for (std::size_t week = 0; week < TreatmentRegimen::kWeeks; ++week) {
    const int first = regimen.treatment_start_day + 7 * static_cast<int>(week);
    for (int d = 0; d < regimen.treatment_days_per_week; ++d) {
      const int day = first + d;
      if (day >= days) continue;
      events.push_back({day, regimen.weekly_doses[week], regimen.chemo});
    }
  }
  return events;
}

std::vector<double> daily_factors(const TreatmentRegimen& regimen, double alpha_RT,
                                  const FixedParameters& fixed, const SimulationGrid& grid) {
  std::vector<double> factors(static_cast<std::size_t>(grid.days()), 1.0);
  for (const auto& e : event_schedule(regimen, grid))
    factors[static_cast<std::size_t>(e.day)] *=
        surviving_fraction(e.dose, alpha_RT, fixed, e.chemo);
  return factors;
}

Trajectory simulate(const PatientParameters& theta, const FixedParameters& fixed,
                    const TreatmentRegimen& regimen, const SimulationGrid& grid,
                    Validation mode) {
  validate(theta, mode);
  fixed.validate();
  regimen.validate(mode);
  grid.validate();

  const int spd = grid.steps_per_day();
  const int days = grid.days();
  const auto factors = daily_factors(regimen, theta.alpha_RT, fixed, grid);
  const EulerLogistic euler(theta, grid);

  Trajectory traj;
  const auto n_points = static_cast<std::size_t>(days * spd + 1);
  traj.times.resize(n_points);
  traj.values.resize(n_points);

  double n = theta.N_initial;
  std::size_t k = 0;
  for (int d = 0; d < days; ++d) {
    for (int s = 0; s < spd; ++s, ++k) {
      traj.times[k] = grid.time_at(static_cast<int>(k));
      traj.values[k] = n;
      if (s == 0) n *= factors[static_cast<std::size_t>(d)];
      n = euler.step(n);
    }
  }
  traj.times[k] = grid.time_at(static_cast<int>(k));
  traj.values[k] = n;
  return traj;
}

std::vector<double> state_at_days(const PatientParameters& theta,
                                  const FixedParameters& fixed,
                                  const TreatmentRegimen& regimen,
                                  const SimulationGrid& grid, std::span<const int> days,
                                  Validation mode) {
  validate(theta, mode);
  regimen.validate(mode);
  const int horizon = grid.days();
  if (!std::is_sorted(days.begin(), days.end()))
    throw std::invalid_argument("requested days must be sorted");
  const auto factors = daily_factors(regimen, theta.alpha_RT, fixed, grid);
  const EulerLogistic euler(theta, grid);

  std::vector<double> out;
  out.reserve(days.size());
  double n = theta.N_initial;
  int current = 0;
  for (int day : days) {
    if (day < 0 || day > horizon) throw std::out_of_range("requested day outside grid");
    n = euler.advance_days(n, current, day, factors);
    current = day;
    out.push_back(n);
  }
  return out;
}

PatientParameters case_study_patient(int index) {
  switch (index) {
    case 1: return {1.14e-1, 1.17e11, 1.54e10, 1.05e-3};
    case 2: return {1.09e-1, 1.09e11, 2.60e10, 4.58e-2};
    case 3: return {2.25e-1, 1.40e11, 2.62e10, 3.90e-2};
    default: throw std::out_of_range("case-study patients are numbered 1..3");
  }
}

}  // namespace dtwin
