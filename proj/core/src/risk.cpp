#include "dtwin/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dtwin/parallel.hpp"

namespace dtwin {

namespace {

std::size_t quantile_rank(std::size_t n, double alpha) {
  // ceil(alpha n) with slack for alpha's binary representation.
  const double r = std::ceil(alpha * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, n);
}

void check_tail(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  if (n == 0 || static_cast<double>(n) * (1.0 - alpha) < 1.0 - 1e-9)
    throw std::invalid_argument(
        fmt::format("{} samples are too few for the {} tail", n, alpha));
}

// Scan the post-treatment window, starting from the state entering
// post_rt_day.
double scan_progression(double n, double n_threshold, const EulerLogistic& euler,
                        std::span<const double> factors, const TTPConfig& cfg,
                        const SimulationGrid& grid) {
  const int spd = euler.steps_per_day();
  int k = cfg.post_rt_day * spd;
  const int threshold_step = cfg.threshold_day * spd;
  for (int d = cfg.post_rt_day; d < cfg.horizon_day; ++d) {
    n *= factors[static_cast<std::size_t>(d)];
    for (int s = 0; s < spd; ++s) {
      n = euler.step(n);
      ++k;
      if (n > n_threshold) return (k - threshold_step) * grid.dt;
    }
  }
  return cfg.max_ttp();
}

}  // namespace

void TTPConfig::validate(const SimulationGrid& grid, const TreatmentRegimen& regimen) const {
  if (!(threshold_day >= 0 && threshold_day < post_rt_day && post_rt_day < horizon_day))
    throw std::invalid_argument("TTP days must satisfy 0 <= threshold < post-RT < horizon");
  if (horizon_day > grid.days())
    throw std::invalid_argument("TTP horizon exceeds the simulation grid");
  if (threshold_day > regimen.treatment_start_day)
    throw std::invalid_argument("TTP threshold day must not follow the start of treatment");
}

void RiskConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  if (n_mc < 1 || n_mc * (1.0 - alpha) < 20.0 - 1e-9)
    throw std::invalid_argument(fmt::format(
        "n_mc = {} leaves fewer than 20 samples in the {} tail", n_mc, alpha));
}

std::vector<double> QoISamples::ttp() const {
  std::vector<double> t(values.size());
  std::transform(values.begin(), values.end(), t.begin(), [](double m) { return -m; });
  return t;
}

double time_to_progression(const PatientParameters& theta, const FixedParameters& fixed,
                           const TreatmentRegimen& regimen, const TTPConfig& cfg,
                           const SimulationGrid& grid, Validation mode) {
  validate(theta, mode);
  regimen.validate(mode);
  cfg.validate(grid, regimen);
  const auto factors = daily_factors(regimen, theta.alpha_RT, fixed, grid);
  const EulerLogistic euler(theta, grid);
  const double n_threshold = euler.advance_days(theta.N_initial, 0, cfg.threshold_day, factors);
  const double n_post = euler.advance_days(n_threshold, cfg.threshold_day, cfg.post_rt_day, factors);
  return scan_progression(n_post, n_threshold, euler, factors, cfg, grid);
}

TtpEvaluator::TtpEvaluator(std::vector<PatientParameters> thetas, const ForwardContext& context,
                           const TreatmentRegimen& first_week)
    : thetas_(std::move(thetas)), context_(context), first_week_(first_week) {
  first_week_.validate(Validation::relaxed);
  context_.ttp.validate(context_.grid, first_week_);
  resume_day_ = std::min(first_week_.treatment_start_day + 7, context_.ttp.post_rt_day);
  threshold_.resize(thetas_.size());
  resume_state_.resize(thetas_.size());
  for (std::size_t i = 0; i < thetas_.size(); ++i) {
    validate(thetas_[i], Validation::relaxed);
    const auto factors = daily_factors(first_week_, thetas_[i].alpha_RT, context_.fixed, context_.grid);
    const EulerLogistic euler(thetas_[i], context_.grid);
    threshold_[i] = euler.advance_days(thetas_[i].N_initial, 0, context_.ttp.threshold_day, factors);
    resume_state_[i] =
        euler.advance_days(threshold_[i], context_.ttp.threshold_day, resume_day_, factors);
  }
}

bool TtpEvaluator::shares_first_week(const TreatmentRegimen& r) const {
  return r.weekly_doses[0] == first_week_.weekly_doses[0] && r.chemo == first_week_.chemo &&
         r.treatment_start_day == first_week_.treatment_start_day &&
         r.treatment_days_per_week == first_week_.treatment_days_per_week;
}

double TtpEvaluator::evaluate_one(std::size_t i, const TreatmentRegimen& regimen) const {
  const auto& theta = thetas_[i];
  if (!shares_first_week(regimen))
    return time_to_progression(theta, context_.fixed, regimen, context_.ttp, context_.grid,
                               Validation::relaxed);
  const auto factors = daily_factors(regimen, theta.alpha_RT, context_.fixed, context_.grid);
  const EulerLogistic euler(theta, context_.grid);
  const double n_post =
      euler.advance_days(resume_state_[i], resume_day_, context_.ttp.post_rt_day, factors);
  return scan_progression(n_post, threshold_[i], euler, factors, context_.ttp, context_.grid);
}

std::vector<double> TtpEvaluator::evaluate(const TreatmentRegimen& regimen,
                                           unsigned threads) const {
  regimen.validate(Validation::relaxed);
  std::vector<double> out(thetas_.size());
  parallel_for(thetas_.size(), threads,
               [&](std::size_t i) { out[i] = evaluate_one(i, regimen); });
  return out;
}

QoISamples TtpEvaluator::qoi(const TreatmentRegimen& regimen, unsigned threads) const {
  QoISamples q;
  q.values = evaluate(regimen, threads);
  for (auto& v : q.values) v = -v;
  q.n_mc = q.values.size();
  return q;
}

TailRisk tail_risk(std::span<const double> samples, double alpha) {
  check_tail(samples.size(), alpha);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double q = sorted[quantile_rank(n, alpha) - 1];
  double excess = 0.0;
  for (auto it = sorted.rbegin(); it != sorted.rend() && *it > q; ++it) excess += *it - q;
  return {q, q + excess / (static_cast<double>(n) * (1.0 - alpha))};
}

double quantile(std::span<const double> samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  const std::size_t r = quantile_rank(sorted.size(), alpha) - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(r), sorted.end());
  return sorted[r];
}

double superquantile(std::span<const double> samples, double alpha) {
  return tail_risk(samples, alpha).superquantile;
}

double superquantile_standard_error(std::span<const double> samples, double alpha) {
  const auto risk = tail_risk(samples, alpha);
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  std::vector<double> infl(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    infl[i] = risk.quantile + std::max(0.0, samples[i] - risk.quantile) / (1.0 - alpha);
    mean += infl[i];
  }
  mean /= n;
  double ss = 0.0;
  for (double v : infl) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0) / n);
}

std::vector<PatientParameters> draw_parameter_set(const PosteriorEnsemble& ensemble,
                                                  std::size_t n, std::uint64_t seed) {
  if (ensemble.empty()) throw std::invalid_argument("posterior ensemble is empty");
  Rng rng(seed);
  std::vector<PatientParameters> out(n);
  const auto size = static_cast<double>(ensemble.size());
  for (auto& theta : out) {
    const auto idx = std::min(static_cast<std::size_t>(uniform01(rng) * size), ensemble.size() - 1);
    theta = ensemble.samples[idx];
  }
  return out;
}

QoISamples propagate(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                     const TreatmentRegimen& regimen, const RiskConfig& risk,
                     std::uint64_t seed, unsigned threads) {
  HiddenTruthGuard guard;
  if (risk.n_mc < 1) throw std::invalid_argument("n_mc must be positive");
  TtpEvaluator frozen(draw_parameter_set(ensemble, static_cast<std::size_t>(risk.n_mc), seed),
                      context);
  auto q = frozen.qoi(regimen, threads);
  q.seed = seed;
  return q;
}

double ttp_superquantile(const PosteriorEnsemble& ensemble, const ForwardContext& context,
                         const TreatmentRegimen& regimen, const RiskConfig& risk,
                         std::uint64_t seed, unsigned threads) {
  risk.validate();
  const auto q = propagate(ensemble, context, regimen, risk, seed, threads);
  return -superquantile(q.values, risk.alpha);
}

void write_qoi_csv(std::ostream& out, const QoISamples& samples) {
  out << "sample_index,ttp_days\n";
  for (std::size_t i = 0; i < samples.values.size(); ++i)
    out << fmt::format("{},{}\n", i, -samples.values[i]);
}

}  // namespace dtwin
