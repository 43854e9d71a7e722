#include "dtwin/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dtwin/parallel.hpp"
#include "dtwin/random.hpp"
#include "json_io.hpp"

namespace dtwin {

namespace fs = std::filesystem;

namespace {

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double four_significant(double p) {
  if (p == 0.0 || !std::isfinite(p)) return p;
  return std::stod(fmt::format("{:.4g}", p));
}

json logrank_json(const LogrankResult& r) {
  return {{"statistic", r.statistic},
          {"p_value", four_significant(r.p_value)},
          {"n_a", r.n_a},
          {"n_b", r.n_b}};
}

std::string arm_label(double d_max) { return fmt::format("OUU:{}", d_max); }

void check_hash(const std::string& found, const RunConfig& cfg, const RunPaths& paths,
                const std::string& what) {
  if (found == cfg.hash()) return;
  std::vector<std::string> diff;
  if (fs::exists(paths.config())) {
    try {
      diff = config_diff(RunConfig::from_json(read_text(paths.config())), cfg);
    } catch (const std::exception&) {
    }
  }
  throw ConfigMismatch(fmt::format("{} was produced by config {}, current config is {}", what,
                                   found, cfg.hash()),
                       std::move(diff));
}

CohortArtifact load_cohort(const RunConfig& cfg, const RunPaths& paths) {
  auto cohort = parse_cohort(read_text(paths.cohort()));
  check_hash(cohort.config_hash, cfg, paths, "cohort.json");
  return cohort;
}

EnsembleArtifact load_ensemble(const RunConfig& cfg, const RunPaths& paths,
                               const std::string& id) {
  auto e = parse_ensemble(read_text(paths.ensemble(id)));
  check_hash(e.config_hash, cfg, paths, "ensemble of " + id);
  return e;
}

FrontArtifact load_front(const RunConfig& cfg, const RunPaths& paths, const std::string& id) {
  auto f = parse_front(read_text(paths.front(id)));
  check_hash(f.config_hash, cfg, paths, "front of " + id);
  return f;
}

std::vector<std::size_t> select(const CohortArtifact& cohort,
                                const std::optional<std::string>& id) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cohort.patients.size(); ++i)
    if (!id || cohort.patients[i].id == *id) idx.push_back(i);
  if (id && idx.empty()) throw std::invalid_argument("unknown patient '" + *id + "'");
  return idx;
}

const ParetoPoint& arm_point(const ParetoFront& front, const std::string& arm) {
  if (arm == "SOC") return front.soc_reference;
  for (const auto& p : front.points)
    if (arm_label(p.d_max) == arm) {
      if (p.failed) throw std::runtime_error("arm " + arm + " failed: " + p.error);
      return p;
    }
  throw std::invalid_argument("unknown arm '" + arm + "'");
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

fs::path RunPaths::survival_csv(const std::string& arm) const {
  std::string name = arm;
  std::replace(name.begin(), name.end(), ':', '_');
  return root / "survival" / (name + ".csv");
}

RunPaths run_paths(const fs::path& out, const RunConfig& cfg) { return {out / cfg.hash()}; }

ConfigMismatch::ConfigMismatch(const std::string& what, std::vector<std::string> diff)
    : std::runtime_error(what), diff_(std::move(diff)) {}

RunPaths prepare_run(const fs::path& out, const RunConfig& cfg) {
  cfg.validate();
  const auto paths = run_paths(out, cfg);
  if (fs::exists(paths.config())) return open_run(paths.root, cfg);
  fs::create_directories(paths.root);
  write_text(paths.config(), cfg.to_json());
  return paths;
}

RunPaths open_run(const fs::path& root, const RunConfig& cfg) {
  RunPaths paths{root};
  if (!fs::exists(paths.config()))
    throw std::runtime_error("no run at '" + root.string() + "' (config.json missing)");
  const auto stored = RunConfig::from_json(read_text(paths.config()));
  if (stored.hash() != cfg.hash())
    throw ConfigMismatch("run directory " + root.string() + " belongs to config " +
                             stored.hash() + ", current config is " + cfg.hash(),
                         config_diff(stored, cfg));
  return paths;
}

CohortArtifact make_cohort(const RunConfig& cfg) {
  cfg.validate();
  CohortArtifact a;
  a.config_hash = cfg.hash();
  a.patients = generate_cohort(cfg.prior, cfg.fixed, cfg.grid, cfg.observation,
                               static_cast<std::size_t>(cfg.cohort_size),
                               derive_seed(cfg.seed, "pipeline.cohort"), cfg.threads);
  return a;
}

PosteriorEnsemble calibrate_patient(const RunConfig& cfg, const VirtualPatient& patient,
                                    std::size_t index) {
  auto m = cfg.mcmc;
  m.seed = derive_seed(cfg.seed, "pipeline.calibrate", index);
  m.threads = 1;
  return calibrate(patient.observations, cfg.prior, cfg.likelihood, cfg.fixed, cfg.grid, m);
}

OptimizationConfig patient_optimization(const RunConfig& cfg, std::size_t index) {
  auto o = cfg.optimization;
  o.seed = derive_seed(cfg.seed, "pipeline.optimize", index);
  o.threads = 1;
  return o;
}

ParetoFront optimize_patient(const RunConfig& cfg, const PosteriorEnsemble& ensemble,
                             std::size_t index) {
  return pareto_sweep(ensemble, cfg.forward(), patient_optimization(cfg, index));
}

std::vector<std::string> arm_labels(const RunConfig& cfg) {
  auto grid = cfg.optimization.d_max_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<std::string> arms;
  for (double d : grid) arms.push_back(arm_label(d));
  arms.push_back("SOC");
  return arms;
}

void stage_cohort(const RunConfig& cfg, const RunPaths& paths) {
  write_text(paths.cohort(), serialize(make_cohort(cfg)));
}

void stage_calibrate(const RunConfig& cfg, const RunPaths& paths,
                     const std::optional<std::string>& patient_id) {
  const auto cohort = load_cohort(cfg, paths);
  const auto idx = select(cohort, patient_id);
  parallel_for(idx.size(), cfg.threads, [&](std::size_t k) {
    const auto i = idx[k];
    const auto& p = cohort.patients[i];
    EnsembleArtifact a{p.id, cfg.hash(), calibrate_patient(cfg, p, i)};
    write_text(paths.ensemble(p.id), serialize(a));
  });
}

void stage_optimize(const RunConfig& cfg, const RunPaths& paths,
                    const std::optional<std::string>& patient_id) {
  const auto cohort = load_cohort(cfg, paths);
  const auto idx = select(cohort, patient_id);
  parallel_for(idx.size(), cfg.threads, [&](std::size_t k) {
    const auto i = idx[k];
    const auto& id = cohort.patients[i].id;
    const auto e = load_ensemble(cfg, paths, id);
    FrontArtifact f{id, cfg.hash(), optimize_patient(cfg, e.ensemble, i)};
    write_text(paths.front(id), serialize(f));
  });

  std::vector<FrontArtifact> fronts;
  for (const auto& p : cohort.patients)
    if (fs::exists(paths.front(p.id))) fronts.push_back(load_front(cfg, paths, p.id));
  std::ostringstream csv;
  write_front_csv(csv, fronts);
  write_text(paths.front_csv(), csv.str());
}

std::vector<ArmSurvival> stage_survival(const RunConfig& cfg, const RunPaths& paths,
                                        const std::vector<std::string>& requested) {
  const auto cohort = load_cohort(cfg, paths);
  const auto all_arms = arm_labels(cfg);
  const auto arms = requested.empty() ? all_arms : requested;
  for (const auto& a : arms)
    if (std::find(all_arms.begin(), all_arms.end(), a) == all_arms.end())
      throw std::invalid_argument("unknown arm '" + a + "'");

  const std::size_t n = cohort.patients.size();
  std::vector<std::string> ids;
  std::vector<FrontArtifact> fronts;
  for (const auto& p : cohort.patients) {
    ids.push_back(p.id);
    fronts.push_back(load_front(cfg, paths, p.id));
  }

  // qoi[patient][arm] on the patient's report draws: the same draws that
  // produced the front's reported superquantiles.
  std::vector<std::string> needed = arms;
  if (std::find(needed.begin(), needed.end(), "SOC") == needed.end()) needed.push_back("SOC");
  std::vector<std::vector<QoISamples>> qoi(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto e = load_ensemble(cfg, paths, ids[i]);
    const auto o = patient_optimization(cfg, i);
    const auto draws = report_draws(e.ensemble, cfg.forward(), o);
    for (const auto& arm : needed) qoi[i].push_back(draws.qoi(arm_point(fronts[i].front, arm).regimen));
  });

  const auto soc_slot = static_cast<std::size_t>(
      std::find(needed.begin(), needed.end(), "SOC") - needed.begin());
  const double max_ttp = cfg.ttp.max_ttp();
  const auto input_for = [&](std::size_t slot) {
    std::vector<double> ttp;
    for (std::size_t i = 0; i < n; ++i)
      ttp.push_back(-superquantile(qoi[i][slot].values, cfg.optimization.alpha));
    return SurvivalInput::from_ttp(ids, ttp, max_ttp);
  };
  const auto soc_input = input_for(soc_slot);

  std::vector<ArmSurvival> out;
  json logrank_all = json::object();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    ArmSurvival s;
    s.arm = arms[a];
    s.input = input_for(a);
    s.curve = kaplan_meier(s.input);
    std::vector<QoISamples> per_patient;
    for (std::size_t i = 0; i < n; ++i) per_patient.push_back(qoi[i][a]);
    const auto arm_index = static_cast<std::uint64_t>(
        std::find(all_arms.begin(), all_arms.end(), s.arm) - all_arms.begin());
    s.band = survival_variance_band(per_patient, cfg.optimization.alpha, cfg.n_boot,
                                    derive_seed(cfg.seed, "pipeline.survival", arm_index),
                                    daily_times(max_ttp), max_ttp, cfg.threads);
    s.versus_soc = logrank(s.input, soc_input);
    std::ostringstream csv;
    write_survival_csv(csv, s.band);
    write_text(paths.survival_csv(s.arm), csv.str());
    logrank_all[s.arm] = logrank_json(s.versus_soc);
    out.push_back(std::move(s));
  }
  write_text(paths.logrank(), logrank_all.dump(1) + "\n");
  return out;
}

ReproduceResult summarize(const RunConfig& cfg, const RunPaths& paths) {
  const auto cohort = load_cohort(cfg, paths);
  ReproduceResult r;
  r.paths = paths;
  r.arms = stage_survival(cfg, paths);

  json patients = json::array();
  json records = json::array();
  std::map<std::string, std::vector<double>> deltas, reductions;
  std::map<std::string, int> counts{{"Early", 0}, {"Intermediate", 0}, {"Late", 0}};
  int converged = 0;
  int flagged = 0;
  const std::string created = now_utc();
  for (const auto& p : cohort.patients) {
    const auto e = load_ensemble(cfg, paths, p.id);
    const auto f = load_front(cfg, paths, p.id);
    PatientOutcome o;
    o.id = p.id;
    o.soc_ttp = f.front.soc_reference.ttp_superquantile;
    o.group = std::string(to_string(classify_progressor(
        days_after_rt(o.soc_ttp, cfg.ttp.threshold_day, cfg.ttp.post_rt_day))));
    if (const auto* p60 = f.front.at(60.0); p60 && !p60->failed) {
      o.ouu60_ttp = p60->ttp_superquantile;
      o.delta_ttp = p60->ttp_superquantile - o.soc_ttp;
    }
    o.reduction = matched_control_dose_reduction(f.front, cfg.matched_tolerance_days);
    const auto& d = e.ensemble.diagnostics;
    o.max_r_hat = *std::max_element(d.r_hat.begin(), d.r_hat.end());
    o.converged = d.converged;
    o.posterior_var_N_initial = e.ensemble.variance()[2];

    ++counts[o.group];
    converged += o.converged ? 1 : 0;
    flagged += o.reduction.flagged ? 1 : 0;
    for (const std::string& key : {std::string("overall"), o.group}) {
      if (o.delta_ttp) deltas[key].push_back(*o.delta_ttp);
      reductions[key].push_back(o.reduction.reduction_gy);
    }
    patients.push_back({{"id", o.id},
                        {"group", o.group},
                        {"soc_ttp_superquantile", o.soc_ttp},
                        {"ouu60_ttp_superquantile", optional_json(o.ouu60_ttp)},
                        {"delta_ttp", optional_json(o.delta_ttp)},
                        {"dose_reduction_gy", o.reduction.reduction_gy},
                        {"matched_d_max", optional_json(o.reduction.matched_d_max)},
                        {"dose_reduction_flagged", o.reduction.flagged},
                        {"max_r_hat", o.max_r_hat},
                        {"converged", o.converged}});
    records.push_back({{"id", p.id},
                       {"observations", p.observations.entries},
                       {"ensemble", fs::relative(paths.ensemble(p.id), paths.root).string()},
                       {"pareto", fs::relative(paths.front(p.id), paths.root).string()},
                       {"config_hash", cfg.hash()},
                       {"updated_at", created}});
    r.patients.push_back(std::move(o));
  }

  json arms = json::object();
  for (const auto& s : r.arms) {
    std::vector<double> ttp, dose;
    for (std::size_t i = 0; i < s.input.entries.size(); ++i) ttp.push_back(s.input.entries[i].ttp);
    for (const auto& p : cohort.patients)
      dose.push_back(arm_point(load_front(cfg, paths, p.id).front, s.arm).total_dose);
    arms[s.arm] = {{"median_ttp_superquantile", optional_json(median(ttp))},
                   {"median_total_dose", optional_json(median(dose))},
                   {"logrank_vs_soc", logrank_json(s.versus_soc)}};
  }

  json groups = json::object();
  for (const char* g : {"overall", "Early", "Intermediate", "Late"}) {
    groups[g] = {{"count", std::string(g) == "overall" ? static_cast<int>(cohort.patients.size()) : counts[g]},
                 {"median_delta_ttp_ouu60", optional_json(median(deltas[g]))},
                 {"median_dose_reduction_gy", optional_json(median(reductions[g]))}};
  }
  const auto overall_reduction = median(reductions["overall"]);
  const double soc_dose = TreatmentRegimen::standard_of_care().total_dose();

  json summary = {
      {"config_hash", cfg.hash()},
      {"scale", std::string(to_string(cfg.scale))},
      {"seed", cfg.seed},
      {"cohort_size", cfg.cohort_size},
      {"arms", arms},
      {"groups", groups},
      {"median_dose_reduction_percent",
       overall_reduction ? json(100.0 * *overall_reduction / soc_dose) : json(nullptr)},
      {"dose_reductions_flagged", flagged},
      {"calibration", {{"patients", cohort.patients.size()}, {"converged", converged}}},
      {"patients", patients}};
  r.summary_json = summary.dump(1) + "\n";
  write_text(paths.summary(), r.summary_json);
  write_text(paths.records(), records.dump(1) + "\n");
  return r;
}

ReproduceResult reproduce(const RunConfig& cfg, const fs::path& out) {
  const auto paths = prepare_run(out, cfg);
  stage_cohort(cfg, paths);
  stage_calibrate(cfg, paths);
  stage_optimize(cfg, paths);
  return summarize(cfg, paths);
}

WhatIf evaluate_what_if(const RunConfig& cfg, const PosteriorEnsemble& ensemble,
                        const TreatmentRegimen& regimen, double alpha, int n_mc,
                        std::uint64_t seed) {
  regimen.validate(Validation::strict);
  const RiskConfig risk{alpha, n_mc};
  risk.validate();
  WhatIf w;
  w.regimen = regimen;
  w.alpha = alpha;
  w.n_mc = n_mc;
  w.seed = seed;
  w.total_dose = regimen.total_dose();
  w.converged = ensemble.diagnostics.converged;
  const auto q = propagate(ensemble, cfg.forward(), regimen, risk, seed, cfg.threads);
  const auto tail = tail_risk(q.values, alpha);
  w.ttp_superquantile = -tail.superquantile;
  w.ttp_quantile = -tail.quantile;
  const double max_ttp = cfg.ttp.max_ttp();
  w.histogram.assign(static_cast<std::size_t>(std::ceil(max_ttp)), 0);
  for (double ttp : q.ttp()) {
    if (ttp >= max_ttp) {
      ++w.end_of_simulation;
      continue;
    }
    const auto bin = static_cast<std::size_t>(std::max(0.0, std::floor(ttp)));
    ++w.histogram[std::min(bin, w.histogram.size() - 1)];
  }
  return w;
}

std::string serialize(const WhatIf& w) {
  const json j = {{"u", w.regimen.weekly_doses},
                  {"alpha", w.alpha},
                  {"n_mc", w.n_mc},
                  {"seed", w.seed},
                  {"ttp_samples_histogram",
                   {{"bin_width_days", 1},
                    {"counts", w.histogram},
                    {"end_of_simulation", w.end_of_simulation}}},
                  {"ttp_superquantile", w.ttp_superquantile},
                  {"ttp_quantile", w.ttp_quantile},
                  {"total_dose", w.total_dose},
                  {"converged", w.converged}};
  return j.dump() + "\n";
}

}  // namespace dtwin
