#include "dtwin/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dtwin/random.hpp"

namespace dtwin {

using nlohmann::json;

namespace {

json prior_json(const ParameterPrior& p) {
  return {{"mean", p.mean}, {"stddev", p.stddev}, {"lower", p.lower}, {"upper", p.upper}};
}

ParameterPrior prior_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("stddev").get<double>(), j.at("lower").get<double>(),
          j.at("upper").get<double>()};
}

json to_json_tree(const RunConfig& c) {
  json j;
  j["scale"] = std::string(to_string(c.scale));
  j["seed"] = c.seed;
  j["cohort_size"] = c.cohort_size;
  j["prior"] = {{"rho", prior_json(c.prior.rho)},
                {"K", prior_json(c.prior.K)},
                {"N_initial", prior_json(c.prior.N_initial)},
                {"alpha_RT", prior_json(c.prior.alpha_RT)}};
  j["observation"] = {{"sigma", c.observation.sigma}, {"schedule", c.observation.schedule}};
  j["fixed"] = {{"S_C", c.fixed.S_C}, {"alpha_beta_ratio", c.fixed.alpha_beta_ratio}};
  j["grid"] = {{"dt", c.grid.dt}, {"t_end", c.grid.t_end}};
  j["ttp"] = {{"threshold_day", c.ttp.threshold_day},
              {"post_rt_day", c.ttp.post_rt_day},
              {"horizon_day", c.ttp.horizon_day}};
  j["likelihood"] = {{"sigma", c.likelihood.sigma}, {"days", c.likelihood.days}};
  j["mcmc"] = {{"chains", c.mcmc.chains},
               {"samples_per_chain", c.mcmc.samples_per_chain},
               {"thin", c.mcmc.thin},
               {"burn_in_fraction", c.mcmc.burn_in_fraction},
               {"target_acceptance", c.mcmc.target_acceptance},
               {"r_hat_threshold", c.mcmc.r_hat_threshold}};
  j["risk"] = {{"alpha", c.risk.alpha}, {"n_mc", c.risk.n_mc}};
  const auto& o = c.optimization;
  j["optimization"] = {{"d_max_grid", o.d_max_grid},
                       {"lambda", o.lambda},
                       {"restarts", o.restarts},
                       {"max_evals_per_restart", o.max_evals_per_restart},
                       {"n_mc", o.n_mc},
                       {"report_n_mc", o.report_n_mc},
                       {"alpha", o.alpha},
                       {"rho_begin", o.rho_begin},
                       {"rho_end", o.rho_end}};
  j["survival"] = {{"n_boot", c.n_boot}, {"matched_tolerance_days", c.matched_tolerance_days}};
  return j;
}

RunConfig from_json_tree(const json& j) {
  RunConfig c;
  c.scale = parse_scale(j.at("scale").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.cohort_size = j.at("cohort_size").get<int>();
  const auto& p = j.at("prior");
  c.prior.rho = prior_from(p.at("rho"));
  c.prior.K = prior_from(p.at("K"));
  c.prior.N_initial = prior_from(p.at("N_initial"));
  c.prior.alpha_RT = prior_from(p.at("alpha_RT"));
  c.observation.sigma = j.at("observation").at("sigma").get<double>();
  c.observation.schedule = j.at("observation").at("schedule").get<std::vector<int>>();
  c.fixed.S_C = j.at("fixed").at("S_C").get<double>();
  c.fixed.alpha_beta_ratio = j.at("fixed").at("alpha_beta_ratio").get<double>();
  c.grid.dt = j.at("grid").at("dt").get<double>();
  c.grid.t_end = j.at("grid").at("t_end").get<double>();
  c.ttp.threshold_day = j.at("ttp").at("threshold_day").get<int>();
  c.ttp.post_rt_day = j.at("ttp").at("post_rt_day").get<int>();
  c.ttp.horizon_day = j.at("ttp").at("horizon_day").get<int>();
  c.likelihood.sigma = j.at("likelihood").at("sigma").get<double>();
  c.likelihood.days = j.at("likelihood").at("days").get<std::vector<int>>();
  const auto& m = j.at("mcmc");
  c.mcmc.chains = m.at("chains").get<int>();
  c.mcmc.samples_per_chain = m.at("samples_per_chain").get<int>();
  c.mcmc.thin = m.at("thin").get<int>();
  c.mcmc.burn_in_fraction = m.at("burn_in_fraction").get<double>();
  c.mcmc.target_acceptance = m.at("target_acceptance").get<double>();
  c.mcmc.r_hat_threshold = m.at("r_hat_threshold").get<double>();
  c.risk.alpha = j.at("risk").at("alpha").get<double>();
  c.risk.n_mc = j.at("risk").at("n_mc").get<int>();
  const auto& o = j.at("optimization");
  c.optimization.d_max_grid = o.at("d_max_grid").get<std::vector<double>>();
  c.optimization.lambda = o.at("lambda").get<double>();
  c.optimization.restarts = o.at("restarts").get<int>();
  c.optimization.max_evals_per_restart = o.at("max_evals_per_restart").get<int>();
  c.optimization.n_mc = o.at("n_mc").get<int>();
  c.optimization.report_n_mc = o.at("report_n_mc").get<int>();
  c.optimization.alpha = o.at("alpha").get<double>();
  c.optimization.rho_begin = o.at("rho_begin").get<double>();
  c.optimization.rho_end = o.at("rho_end").get<double>();
  c.n_boot = j.at("survival").at("n_boot").get<int>();
  c.matched_tolerance_days = j.at("survival").at("matched_tolerance_days").get<double>();
  return c;
}

// Keys of `patch` must exist in `base` with the same shape.
void check_known_keys(const json& base, const json& patch, const std::string& where) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw std::invalid_argument("unknown config key '" + path + "'");
    if (it->is_object()) {
      if (!base.at(it.key()).is_object())
        throw std::invalid_argument("config key '" + path + "' is not an object");
      check_known_keys(base.at(it.key()), *it, path);
    }
  }
}

void diff_trees(const json& a, const json& b, const std::string& where,
                std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      const std::string path = where.empty() ? it.key() : where + "." + it.key();
      if (b.contains(it.key()))
        diff_trees(*it, b.at(it.key()), path, out);
      else
        out.push_back(path + ": " + it->dump() + " -> (absent)");
    }
    for (auto it = b.begin(); it != b.end(); ++it)
      if (!a.contains(it.key()))
        out.push_back((where.empty() ? it.key() : where + "." + it.key()) + ": (absent) -> " +
                      it->dump());
    return;
  }
  if (a != b) out.push_back(where + ": " + a.dump() + " -> " + b.dump());
}

}  // namespace

std::string_view to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

Scale parse_scale(std::string_view s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw std::invalid_argument(fmt::format("unknown scale '{}' (expected desk or paper)", s));
}

RunConfig RunConfig::preset(Scale scale) {
  RunConfig c;
  c.scale = scale;
  if (scale == Scale::desk) {
    c.cohort_size = 20;
    c.mcmc.samples_per_chain = 10'000;
    c.risk.n_mc = 1000;
    c.optimization = OptimizationConfig::desk();
    c.n_boot = 100;
  } else {
    c.cohort_size = 100;
    c.mcmc.samples_per_chain = 100'000;
    c.mcmc.thin = 100;
    c.risk.n_mc = 5000;
    c.optimization = OptimizationConfig::paper();
    c.n_boot = 500;
  }
  return c;
}

void RunConfig::validate() const {
  if (cohort_size < 1) throw std::invalid_argument("cohort_size must be positive");
  prior.validate();
  observation.validate();
  fixed.validate();
  grid.validate();
  ttp.validate(grid, TreatmentRegimen::standard_of_care());
  likelihood.validate();
  mcmc.validate();
  risk.validate();
  optimization.validate();
  if (n_boot < 0) throw std::invalid_argument("n_boot must be nonnegative");
  if (!(matched_tolerance_days >= 0.0))
    throw std::invalid_argument("matched_tolerance_days must be nonnegative");
}

std::string RunConfig::to_json() const { return to_json_tree(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json(std::string_view text, std::optional<Scale> scale_override) {
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!patch.is_object()) throw std::invalid_argument("config must be a JSON object");
  Scale scale = Scale::desk;
  if (scale_override) {
    scale = *scale_override;
    patch["scale"] = std::string(to_string(scale));
  } else if (patch.contains("scale")) {
    scale = parse_scale(patch.at("scale").get<std::string>());
  }
  json tree = to_json_tree(preset(scale));
  check_known_keys(tree, patch, "");
  tree.merge_patch(patch);
  RunConfig c;
  try {
    c = from_json_tree(tree);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::string RunConfig::hash() const { return fmt::format("{:016x}", fnv1a64(to_json())); }

std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  diff_trees(to_json_tree(a), to_json_tree(b), "", out);
  return out;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<Scale> scale_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigNotFound("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return RunConfig::from_json(ss.str(), scale_override);
}

}  // namespace dtwin
