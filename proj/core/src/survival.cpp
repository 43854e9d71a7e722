#include "dtwin/survival.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <stdexcept>

#include "dtwin/parallel.hpp"
#include "dtwin/random.hpp"

namespace dtwin {

namespace {

struct Times {
  double t;
  bool event;
};

SurvivalCurve product_limit(std::vector<Times> data) {
  std::sort(data.begin(), data.end(), [](const Times& a, const Times& b) { return a.t < b.t; });
  SurvivalCurve curve;
  curve.subjects = data.size();
  double s = 1.0;
  std::size_t i = 0;
  const std::size_t n = data.size();
  while (i < n) {
    const double t = data[i].t;
    const int at_risk = static_cast<int>(n - i);
    int events = 0;
    std::size_t j = i;
    for (; j < n && data[j].t == t; ++j) events += data[j].event ? 1 : 0;
    if (events > 0) {
      s *= 1.0 - static_cast<double>(events) / at_risk;
      curve.steps.push_back({t, s, at_risk, events});
    }
    i = j;
  }
  return curve;
}

}  // namespace

SurvivalInput SurvivalInput::from_ttp(const std::vector<std::string>& ids,
                                      const std::vector<double>& ttp, double max_ttp) {
  if (ids.size() != ttp.size()) throw std::invalid_argument("ids and ttp differ in length");
  SurvivalInput in;
  for (std::size_t i = 0; i < ids.size(); ++i)
    in.entries.push_back({ids[i], ttp[i], ttp[i] >= max_ttp});
  in.validate(max_ttp);
  return in;
}

void SurvivalInput::validate(double max_ttp) const {
  if (entries.empty()) throw std::invalid_argument("survival input is empty");
  for (const auto& e : entries) {
    if (!(e.ttp > 0.0 && e.ttp <= max_ttp))
      throw std::invalid_argument(fmt::format("ttp {} of '{}' outside (0, {}]", e.ttp,
                                              e.patient_id, max_ttp));
    if (e.censored != (e.ttp == max_ttp))
      throw std::invalid_argument("entries are censored exactly at the horizon");
  }
}

double SurvivalCurve::at(double t) const {
  double s = 1.0;
  for (const auto& step : steps) {
    if (step.t > t) break;
    s = step.survival;
  }
  return s;
}

SurvivalCurve kaplan_meier(const SurvivalInput& input) {
  if (input.entries.empty()) throw std::invalid_argument("survival input is empty");
  std::vector<Times> data;
  data.reserve(input.entries.size());
  for (const auto& e : input.entries) data.push_back({e.ttp, !e.censored});
  return product_limit(std::move(data));
}

std::vector<double> daily_times(double max_ttp) {
  std::vector<double> t;
  for (int d = 0; d <= static_cast<int>(std::floor(max_ttp)); ++d) t.push_back(d);
  return t;
}

SurvivalBand survival_variance_band(const std::vector<QoISamples>& per_patient, double alpha,
                                    int n_boot, std::uint64_t seed,
                                    const std::vector<double>& times, double max_ttp,
                                    unsigned threads) {
  if (per_patient.empty()) throw std::invalid_argument("no patients for the band");
  for (const auto& p : per_patient)
    if (p.values.empty()) throw std::invalid_argument("patient without TTP samples");

  const auto curve_of = [&](const std::vector<double>& ttp) {
    std::vector<Times> data;
    data.reserve(ttp.size());
    for (double t : ttp) data.push_back({t, t < max_ttp});
    return product_limit(std::move(data));
  };

  SurvivalBand band;
  band.times = times;
  std::vector<double> base;
  for (const auto& p : per_patient) base.push_back(-superquantile(p.values, alpha));
  const auto base_curve = curve_of(base);
  for (double t : times) band.survival.push_back(base_curve.at(t));

  const std::size_t reps = n_boot > 1 ? static_cast<std::size_t>(n_boot) : 0;
  std::vector<std::vector<double>> replicate(reps);
  parallel_for(reps, threads, [&](std::size_t b) {
    auto rng = make_rng(seed, "survival.bootstrap", b);
    std::vector<double> ttp;
    ttp.reserve(per_patient.size());
    std::vector<double> resampled;
    for (const auto& p : per_patient) {
      const std::size_t n = p.values.size();
      resampled.resize(n);
      for (auto& v : resampled) {
        auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
        v = p.values[std::min(k, n - 1)];
      }
      ttp.push_back(-superquantile(resampled, alpha));
    }
    const auto c = curve_of(ttp);
    replicate[b].reserve(times.size());
    for (double t : times) replicate[b].push_back(c.at(t));
  });

  for (std::size_t k = 0; k < times.size(); ++k) {
    double sd = 0.0;
    if (reps > 1) {
      // Shifted by the first replicate so identical replicates give exactly 0.
      const double shift = replicate[0][k];
      double s1 = 0.0, s2 = 0.0;
      for (const auto& r : replicate) {
        const double d = r[k] - shift;
        s1 += d;
        s2 += d * d;
      }
      const double n = static_cast<double>(reps);
      sd = std::sqrt(std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0)));
    }
    band.sd.push_back(sd);
    band.lower.push_back(std::clamp(band.survival[k] - 1.96 * sd, 0.0, 1.0));
    band.upper.push_back(std::clamp(band.survival[k] + 1.96 * sd, 0.0, 1.0));
  }
  return band;
}

double chi_square_sf_1dof(double x) {
  if (std::isnan(x)) throw std::invalid_argument("chi-square statistic is NaN");
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

LogrankResult logrank(const SurvivalInput& a, const SurvivalInput& b) {
  if (a.entries.empty() || b.entries.empty())
    throw std::invalid_argument("logrank needs two nonempty groups");
  LogrankResult out;
  out.n_a = a.entries.size();
  out.n_b = b.entries.size();

  std::vector<double> event_times;
  for (const auto* g : {&a, &b})
    for (const auto& e : g->entries)
      if (!e.censored) event_times.push_back(e.ttp);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  const auto count = [](const SurvivalInput& g, double t, int& risk, int& events) {
    risk = 0;
    events = 0;
    for (const auto& e : g.entries) {
      if (e.ttp >= t) ++risk;
      if (e.ttp == t && !e.censored) ++events;
    }
  };

  double o_minus_e = 0.0;
  double var = 0.0;
  for (double t : event_times) {
    int ra, da, rb, db;
    count(a, t, ra, da);
    count(b, t, rb, db);
    const double n = ra + rb;
    const double d = da + db;
    o_minus_e += da - d * ra / n;
    if (n > 1.0) var += d * (ra / n) * (rb / n) * (n - d) / (n - 1.0);
  }
  out.observed_minus_expected = o_minus_e;
  out.variance = var;
  if (var <= 0.0) return out;
  out.statistic = o_minus_e * o_minus_e / var;
  out.p_value = chi_square_sf_1dof(out.statistic);
  return out;
}

void write_survival_csv(std::ostream& out, const SurvivalBand& band) {
  out << "t_days,survival_prob,band_lo,band_hi\n";
  for (std::size_t k = 0; k < band.times.size(); ++k)
    out << fmt::format("{},{},{},{}\n", band.times[k], band.survival[k], band.lower[k],
                       band.upper[k]);
}

}  // namespace dtwin
