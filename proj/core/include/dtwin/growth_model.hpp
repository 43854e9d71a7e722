#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace dtwin {

/// Uncertain digital state of one patient.
struct PatientParameters {
  double rho = 0.0;        // proliferation rate, 1/day
  double K = 0.0;          // carrying capacity, cells
  double N_initial = 0.0;  // tumor burden at day 0, cells
  double alpha_RT = 0.0;   // radiosensitivity, 1/Gy

  std::array<double, 4> as_array() const { return {rho, K, N_initial, alpha_RT}; }
  static PatientParameters from_array(std::span<const double, 4> v) {
    return {v[0], v[1], v[2], v[3]};
  }
  friend bool operator==(const PatientParameters&, const PatientParameters&) = default;
};

/// Parameters shared by every patient.
struct FixedParameters {
  double S_C = 0.82;               // chemotherapy surviving fraction
  double alpha_beta_ratio = 10.0;  // Gy

  double beta_RT(double alpha_RT) const { return alpha_RT / alpha_beta_ratio; }
  void validate() const;
};

/// Production code enforces strict input checks. `relaxed` admits the
/// boundary cases used by analytic tests: zero proliferation, any first-week
/// dose, chemotherapy switched off.
enum class Validation { strict, relaxed };

struct TreatmentRegimen {
  static constexpr std::size_t kWeeks = 6;
  static constexpr double kFirstWeekDose = 2.0;
  static constexpr double kMaxDose = 10.0;

  std::array<double, kWeeks> weekly_doses{2, 2, 2, 2, 2, 2};  // Gy/day
  int treatment_start_day = 20;
  int treatment_days_per_week = 5;
  bool chemo = true;

  static TreatmentRegimen standard_of_care() { return {}; }
  /// u_1 fixed at the first-week dose, u_2..u_6 from `tail`.
  static TreatmentRegimen with_tail(std::span<const double> tail);

  std::array<double, kWeeks - 1> tail() const;
  double l1_norm() const;
  /// 5 * ||u||_1 in Gy (for the default five treatment days per week).
  double total_dose() const { return treatment_days_per_week * l1_norm(); }
  int last_treatment_day() const;

  void validate(Validation mode = Validation::strict) const;
};

struct SimulationGrid {
  double dt = 0.2;       // days
  double t_end = 152.0;  // days

  int steps_per_day() const;
  int days() const;
  int total_steps() const { return days() * steps_per_day(); }
  double time_at(int step) const { return step * dt; }
  void validate() const;
};

/// Sampled tumor burden. values[k] is the count entering grid time
/// times[k], before any treatment event applied at that instant.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> values;

  /// Value at an integer day boundary.
  double at_day(int day, const SimulationGrid& grid) const;
  void write_csv(std::ostream& out) const;
};

struct TreatmentEvent {
  int day = 0;
  double dose = 0.0;  // Gy
  bool chemo = false;
  friend bool operator==(const TreatmentEvent&, const TreatmentEvent&) = default;
};

void validate(const PatientParameters& theta, Validation mode = Validation::strict);

/// Linear-quadratic survival times the chemotherapy factor when active.
double surviving_fraction(double dose, double alpha_RT, const FixedParameters& fixed,
                          bool chemo_active);

std::vector<TreatmentEvent> event_schedule(const TreatmentRegimen& regimen,
                                           const SimulationGrid& grid);

/// Multiplicative treatment factor applied at the start of each day
/// (1.0 on days without events). Size grid.days().
std::vector<double> daily_factors(const TreatmentRegimen& regimen, double alpha_RT,
                                  const FixedParameters& fixed, const SimulationGrid& grid);

/// Forward-Euler stepping of dN/dt = rho N (1 - N/K) with day-start events.
///
/// This is the one integration kernel shared by simulate(), observation
/// generation, the calibration likelihood and TTP evaluation, so every path
/// produces bitwise-identical states.
class EulerLogistic {
 public:
  EulerLogistic(const PatientParameters& theta, const SimulationGrid& grid)
      : dt_(grid.dt), rho_(theta.rho), K_(theta.K), steps_per_day_(grid.steps_per_day()) {}

  double step(double n) const { return n + dt_ * rho_ * n * (1.0 - n / K_); }

  /// State entering day `day_end`, starting from state `n` entering
  /// `day_begin`; factors[d] is applied at the start of each day d.
  double advance_days(double n, int day_begin, int day_end,
                      std::span<const double> factors) const {
    for (int d = day_begin; d < day_end; ++d) {
      n *= factors[static_cast<std::size_t>(d)];
      for (int s = 0; s < steps_per_day_; ++s) n = step(n);
    }
    return n;
  }

  int steps_per_day() const { return steps_per_day_; }

 private:
  double dt_;
  double rho_;
  double K_;
  int steps_per_day_;
};

Trajectory simulate(const PatientParameters& theta, const FixedParameters& fixed,
                    const TreatmentRegimen& regimen, const SimulationGrid& grid,
                    Validation mode = Validation::strict);

/// Counts entering each requested integer day, without storing the trajectory.
std::vector<double> state_at_days(const PatientParameters& theta,
                                  const FixedParameters& fixed,
                                  const TreatmentRegimen& regimen,
                                  const SimulationGrid& grid, std::span<const int> days,
                                  Validation mode = Validation::strict);

/// Table 3 case-study patients (1-based index).
PatientParameters case_study_patient(int index);

}  // namespace dtwin
