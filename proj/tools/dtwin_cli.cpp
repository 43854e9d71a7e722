// dtwin: command-line front end for the tumor digital-twin pipeline.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dtwin/artifacts.hpp"
#include "dtwin/config.hpp"
#include "dtwin/http_api.hpp"
#include "dtwin/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMismatch = 3;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string scale;
  std::string out = "runs";
  std::string run_dir;
  unsigned threads = 1;
};

dtwin::RunConfig resolve_config(const Globals& g) {
  std::optional<dtwin::Scale> scale;
  if (!g.scale.empty()) scale = dtwin::parse_scale(g.scale);
  auto cfg = g.config_path.empty() ? dtwin::RunConfig::preset(scale.value_or(dtwin::Scale::desk))
                                   : dtwin::load_config(g.config_path, scale);
  if (g.seed) cfg.seed = *g.seed;
  cfg.threads = g.threads;
  cfg.validate();
  return cfg;
}

dtwin::RunPaths existing_run(const Globals& g, const dtwin::RunConfig& cfg) {
  const fs::path root = g.run_dir.empty() ? dtwin::run_paths(g.out, cfg).root : fs::path(g.run_dir);
  return dtwin::open_run(root, cfg);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double x = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
    v.push_back(x);
  }
  return v;
}

dtwin::TreatmentRegimen regimen_from(const std::string& u) {
  if (u.empty()) return dtwin::TreatmentRegimen::standard_of_care();
  const auto v = parse_list(u);
  if (v.size() != dtwin::TreatmentRegimen::kWeeks - 1)
    throw std::invalid_argument("--u takes five weekly doses u2..u6");
  return dtwin::TreatmentRegimen::with_tail(v);
}

dtwin::EnsembleArtifact load_patient_ensemble(const dtwin::RunPaths& paths,
                                              const dtwin::RunConfig& cfg,
                                              const std::string& id) {
  auto e = dtwin::parse_ensemble(dtwin::read_text(paths.ensemble(id)));
  if (e.config_hash != cfg.hash())
    throw dtwin::ConfigMismatch("ensemble of " + id + " belongs to another config", {});
  return e;
}

dtwin::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital twins of tumor growth under radiotherapy: simulate, calibrate, optimize"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--scale", g.scale, "Preset: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--out", g.out, "Output root; runs live in <out>/<config hash>");
  app.add_option("--run", g.run_dir, "Explicit run directory (overrides --out)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1u, 1024u));

  auto* sim = app.add_subcommand("simulate", "Forward model trajectory to CSV");
  int patient_index = 0;
  std::string theta_text, u_text, csv_path = "trajectory.csv";
  bool relaxed = false;
  bool no_chemo = false;
  bool untreated = false;
  auto* patient_opt = sim->add_option("--patient", patient_index, "Case-study patient 1..3")->check(CLI::Range(1, 3));
  sim->add_option("--theta", theta_text, "rho,K,N_initial,alpha_RT")->excludes(patient_opt);
  sim->add_option("--u", u_text, "Weekly doses u2..u6, Gy/day (default: standard of care)");
  sim->add_option("--csv", csv_path, "Trajectory file");
  sim->add_flag("--relaxed", relaxed, "Admit boundary inputs such as rho = 0");
  sim->add_flag("--no-chemo", no_chemo, "Radiotherapy only (implies --relaxed)");
  sim->add_flag("--untreated", untreated, "No radiotherapy or chemotherapy (implies --relaxed)");

  app.add_subcommand("cohort", "Generate the virtual cohort and its observations");

  auto* cal = app.add_subcommand("calibrate", "Two-step Bayesian calibration per patient");
  std::string patient_id;
  cal->add_option("--patient", patient_id, "Patient id (default: all)");

  auto* opt = app.add_subcommand("optimize", "Pareto front of risk against total dose");
  opt->add_option("--patient", patient_id, "Patient id (default: all)");

  auto* surv = app.add_subcommand("survival", "Kaplan-Meier curves and logrank tests per arm");
  std::vector<std::string> arms;
  surv->add_option("--arm", arms, "Arm label such as OUU:60 or SOC (default: all)");

  app.add_subcommand("reproduce", "Run every stage and write summary.json");

  auto* eval = app.add_subcommand("evaluate", "What-if risk of one regimen for one patient");
  double alpha = 0.95;
  int n_mc = 0;
  std::uint64_t eval_seed = 0;
  bool force = false;
  eval->add_option("--patient", patient_id, "Patient id")->required();
  eval->add_option("--u", u_text, "Weekly doses u2..u6, Gy/day")->required();
  eval->add_option("--alpha", alpha, "Risk level");
  eval->add_option("--n-mc", n_mc, "Samples (default: config risk.n_mc)");
  eval->add_option("--eval-seed", eval_seed, "Sampling seed");
  eval->add_flag("--force", force, "Evaluate even when the posterior is flagged");

  auto* serve = app.add_subcommand("serve", "HTTP API over a finished run");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(g);

    if (*sim) {
      dtwin::PatientParameters theta;
      if (!theta_text.empty()) {
        const auto v = parse_list(theta_text);
        if (v.size() != 4) throw std::invalid_argument("--theta takes four values");
        theta = {v[0], v[1], v[2], v[3]};
      } else {
        theta = dtwin::case_study_patient(patient_index == 0 ? 1 : patient_index);
      }
      auto regimen = regimen_from(u_text);
      regimen.chemo = !no_chemo && !untreated;
      if (untreated) regimen.weekly_doses.fill(0.0);
      const auto mode = relaxed || no_chemo || untreated ? dtwin::Validation::relaxed
                                                         : dtwin::Validation::strict;
      const auto traj = dtwin::simulate(theta, cfg.fixed, regimen, cfg.grid, mode);
      std::ofstream out(csv_path);
      if (!out) throw std::runtime_error("cannot write '" + csv_path + "'");
      traj.write_csv(out);
      fmt::print("day,N_cells\n");
      for (int d = 0; d <= cfg.grid.days(); ++d) fmt::print("{},{}\n", d, traj.at_day(d, cfg.grid));
      fmt::print(stderr, "wrote {} rows to {}\n", traj.times.size(), csv_path);
      return 0;
    }
    if (app.got_subcommand("cohort")) {
      const auto paths = g.run_dir.empty() ? dtwin::prepare_run(g.out, cfg)
                                           : dtwin::open_run(g.run_dir, cfg);
      dtwin::stage_cohort(cfg, paths);
      fmt::print("{}\n", paths.cohort().string());
      return 0;
    }
    if (*cal) {
      const auto paths = existing_run(g, cfg);
      dtwin::stage_calibrate(cfg, paths, patient_id.empty() ? std::nullopt : std::optional(patient_id));
      fmt::print("{}\n", (paths.root / "ensembles").string());
      return 0;
    }
    if (*opt) {
      const auto paths = existing_run(g, cfg);
      dtwin::stage_optimize(cfg, paths, patient_id.empty() ? std::nullopt : std::optional(patient_id));
      fmt::print("{}\n", paths.front_csv().string());
      return 0;
    }
    if (*surv) {
      const auto paths = existing_run(g, cfg);
      for (const auto& s : dtwin::stage_survival(cfg, paths, arms))
        fmt::print("{}: logrank vs SOC statistic {:.4g}, p {:.4g}\n", s.arm, s.versus_soc.statistic,
                   s.versus_soc.p_value);
      return 0;
    }
    if (app.got_subcommand("reproduce")) {
      const auto r = dtwin::reproduce(cfg, g.out);
      std::cout << r.summary_json;
      fmt::print(stderr, "summary written to {}\n", r.paths.summary().string());
      return 0;
    }
    if (*eval) {
      const auto paths = existing_run(g, cfg);
      const auto e = load_patient_ensemble(paths, cfg, patient_id);
      if (!e.ensemble.diagnostics.converged && !force) {
        fmt::print(stderr, "posterior of {} is flagged as not converged; pass --force\n", patient_id);
        return kExitFailure;
      }
      const auto w = dtwin::evaluate_what_if(cfg, e.ensemble, regimen_from(u_text), alpha,
                                             n_mc > 0 ? n_mc : cfg.risk.n_mc, eval_seed);
      std::cout << dtwin::serialize(w);
      return 0;
    }
    if (*serve) {
      const auto paths = existing_run(g, cfg);
      dtwin::TwinService service(paths.root, cfg.threads);
      dtwin::HttpServer server(service);
      const int bound = server.bind(host, port);
      fmt::print(stderr, "serving {} on http://{}:{}\n", paths.root.string(), host, bound);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
      return 0;
    }
  } catch (const dtwin::ConfigNotFound& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const dtwin::ConfigMismatch& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    for (const auto& line : e.diff()) fmt::print(stderr, "  {}\n", line);
    return kExitMismatch;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return 0;
}
