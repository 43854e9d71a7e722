#include "dtwin/calibration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dtwin/parallel.hpp"

namespace dtwin {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kDim = 4;

using Vec4 = Eigen::Matrix<double, kDim, 1>;
using Mat4 = Eigen::Matrix<double, kDim, kDim>;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Bounded parameter <-> unconstrained coordinate.
struct LogitMap {
  std::array<double, kDim> lower{};
  std::array<double, kDim> width{};

  explicit LogitMap(const EffectivePrior& prior) {
    for (int i = 0; i < kDim; ++i) {
      lower[i] = prior.marginals[i].lower();
      width[i] = prior.marginals[i].upper() - prior.marginals[i].lower();
    }
  }

  PatientParameters to_theta(const Vec4& z) const {
    std::array<double, kDim> x{};
    for (int i = 0; i < kDim; ++i) x[i] = lower[i] + width[i] * sigmoid(z[i]);
    return PatientParameters::from_array(x);
  }

  Vec4 to_z(const PatientParameters& theta) const {
    const auto x = theta.as_array();
    Vec4 z;
    for (int i = 0; i < kDim; ++i) {
      const double s = std::clamp((x[i] - lower[i]) / width[i], 1e-12, 1.0 - 1e-12);
      z[i] = std::log(s / (1.0 - s));
    }
    return z;
  }

  double log_jacobian(const Vec4& z) const {
    double lj = 0.0;
    for (int i = 0; i < kDim; ++i) lj += std::log(width[i]) - softplus(-z[i]) - softplus(z[i]);
    return lj;
  }
};

struct ChainResult {
  std::vector<PatientParameters> retained;
  double acceptance = 0.0;
};

ChainResult run_chain(const CalibrationProblem& problem, const McmcConfig& config, int chain) {
  Rng rng = make_rng(config.seed, "mcmc.chain", static_cast<std::uint64_t>(chain));
  const LogitMap map(problem.prior);
  const auto log_target = [&](const Vec4& z) {
    const double lp = log_posterior(map.to_theta(z), problem);
    return std::isfinite(lp) ? lp + map.log_jacobian(z) : kNegInf;
  };

  Vec4 z = map.to_z(problem.prior.sample(rng));
  double current = log_target(z);
  for (int attempt = 0; !std::isfinite(current) && attempt < 1000; ++attempt) {
    z = map.to_z(problem.prior.sample(rng));
    current = log_target(z);
  }
  if (!std::isfinite(current))
    throw std::runtime_error("MCMC could not find a starting point with finite posterior");

  const int burn = config.burn_in();
  const int total = burn + config.samples_per_chain;
  Mat4 cov = Mat4::Identity() * 0.25;
  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(kDim)));
  Mat4 chol = cov.llt().matrixL();

  std::vector<Vec4> history;
  history.reserve(static_cast<std::size_t>(burn));
  ChainResult result;
  result.retained.reserve(static_cast<std::size_t>(config.retained_per_chain()));
  long accepted = 0;

  for (int it = 0; it < total; ++it) {
    Vec4 xi;
    for (int i = 0; i < kDim; ++i) xi[i] = standard_normal(rng);
    const Vec4 proposal = z + std::exp(log_scale) * (chol * xi);
    const double candidate = log_target(proposal);
    const double accept_p = acceptance_probability(current, candidate);
    const bool accept = uniform01(rng) < accept_p;
    if (accept) {
      z = proposal;
      current = candidate;
    }

    if (it < burn) {
      const double gain = 1.0 / std::pow(1.0 + it / 50.0, 0.6);
      log_scale += gain * (accept_p - config.target_acceptance);
      history.push_back(z);
      const int seen = it + 1;
      if (seen % 100 == 0 && seen >= 200) {
        const std::size_t from = static_cast<std::size_t>(seen / 2);
        Vec4 mean = Vec4::Zero();
        for (std::size_t k = from; k < history.size(); ++k) mean += history[k];
        const double count = static_cast<double>(history.size() - from);
        mean /= count;
        Mat4 emp = Mat4::Zero();
        for (std::size_t k = from; k < history.size(); ++k) {
          const Vec4 d = history[k] - mean;
          emp += d * d.transpose();
        }
        emp /= (count - 1.0);
        emp += Mat4::Identity() * 1e-8;
        Eigen::LLT<Mat4> llt(emp);
        if (llt.info() == Eigen::Success) {
          cov = emp;
          chol = llt.matrixL();
        }
      }
    } else {
      if (accept) ++accepted;
      if ((it - burn + 1) % config.thin == 0) result.retained.push_back(map.to_theta(z));
    }
  }
  result.acceptance = static_cast<double>(accepted) / config.samples_per_chain;
  return result;
}

}  // namespace

TruncatedNormal step1_update_initial_burden(double o_day0, double sigma) {
  if (!(o_day0 >= 0.0)) throw std::invalid_argument("day-0 observation must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  return {o_day0, sigma, std::max(0.0, o_day0 - 2.0 * sigma), o_day0 + 2.0 * sigma};
}

EffectivePrior EffectivePrior::from(const PriorSpec& prior,
                                    const std::optional<TruncatedNormal>& step1) {
  EffectivePrior eff{{prior.rho.distribution(), prior.K.distribution(),
                      prior.N_initial.distribution(), prior.alpha_RT.distribution()}};
  if (step1) {
    const double lo = std::max(step1->lower(), prior.N_initial.lower);
    const double hi = std::min(step1->upper(), prior.N_initial.upper);
    if (lo < hi) {
      eff.marginals[2] = TruncatedNormal(step1->mean(), step1->stddev(), lo, hi);
    } else {
      eff.marginals[2] = TruncatedNormal(step1->mean(), step1->stddev(),
                                         prior.N_initial.lower, prior.N_initial.upper);
    }
  }
  return eff;
}

bool EffectivePrior::contains(const PatientParameters& theta) const {
  const auto x = theta.as_array();
  for (int i = 0; i < kDim; ++i)
    if (!marginals[i].contains(x[i])) return false;
  return true;
}

double EffectivePrior::log_density(const PatientParameters& theta) const {
  const auto x = theta.as_array();
  double lp = 0.0;
  for (int i = 0; i < kDim; ++i) lp += marginals[i].log_pdf(x[i]);
  return lp;
}

PatientParameters EffectivePrior::sample(Rng& rng) const {
  std::array<double, kDim> x{};
  for (int i = 0; i < kDim; ++i) x[i] = marginals[i].sample(rng);
  return PatientParameters::from_array(x);
}

void LikelihoodSpec::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("likelihood sigma must be positive");
  if (!std::is_sorted(days.begin(), days.end()))
    throw std::invalid_argument("likelihood days must be sorted");
}

double observation_log_likelihood(double obs, double model, double sigma) {
  if (obs < 0.0) return kNegInf;
  const double z = (obs - model) / sigma;
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sigma) - normal_log_cdf(model / sigma);
}

double log_likelihood(const PatientParameters& theta, const CalibrationProblem& problem) {
  const auto& days = problem.likelihood.days;
  if (days.empty()) return 0.0;
  const auto model = state_at_days(theta, problem.fixed, problem.regimen, problem.grid, days);
  double ll = 0.0;
  for (std::size_t i = 0; i < days.size(); ++i) {
    const auto o = problem.observations.at_day(days[i]);
    if (!o)
      throw std::invalid_argument(fmt::format("no observation on assimilated day {}", days[i]));
    ll += observation_log_likelihood(*o, model[i], problem.likelihood.sigma);
  }
  return ll;
}

double log_posterior(const PatientParameters& theta, const CalibrationProblem& problem) {
  if (!problem.prior.contains(theta)) return kNegInf;
  return problem.prior.log_density(theta) + log_likelihood(theta, problem);
}

double acceptance_probability(double log_target_current, double log_target_proposed) {
  if (!std::isfinite(log_target_proposed)) return 0.0;
  if (!std::isfinite(log_target_current)) return 1.0;
  const double diff = log_target_proposed - log_target_current;
  return diff >= 0.0 ? 1.0 : std::exp(diff);
}

int McmcConfig::burn_in() const {
  return std::max(500, static_cast<int>(std::lround(burn_in_fraction * samples_per_chain)));
}

void McmcConfig::validate() const {
  if (chains < 2) throw std::invalid_argument("need at least two chains for R-hat");
  if (thin < 1) throw std::invalid_argument("thinning must be >= 1");
  if (samples_per_chain < 2 * thin)
    throw std::invalid_argument("samples per chain must retain at least two draws");
  if (!(burn_in_fraction >= 0.0))
    throw std::invalid_argument("burn-in fraction must be nonnegative");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw std::invalid_argument("target acceptance must be in (0, 1)");
}

std::array<double, 4> PosteriorEnsemble::mean() const {
  std::array<double, 4> m{};
  for (const auto& s : samples) {
    const auto x = s.as_array();
    for (int i = 0; i < kDim; ++i) m[i] += x[i];
  }
  for (auto& v : m) v /= static_cast<double>(samples.size());
  return m;
}

std::array<double, 4> PosteriorEnsemble::variance() const {
  const auto m = mean();
  std::array<double, 4> v{};
  for (const auto& s : samples) {
    const auto x = s.as_array();
    for (int i = 0; i < kDim; ++i) v[i] += (x[i] - m[i]) * (x[i] - m[i]);
  }
  for (auto& e : v) e /= static_cast<double>(samples.size() - 1);
  return v;
}

double split_r_hat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw std::invalid_argument("R-hat needs at least 4 draws per chain");
    halves.emplace_back(c.data(), h);
    halves.emplace_back(c.data() + c.size() - h, h);
  }
  const double n = static_cast<double>(halves.front().size());
  const double m = static_cast<double>(halves.size());
  std::vector<double> means, vars;
  for (auto h : halves) {
    if (h.size() != halves.front().size())
      throw std::invalid_argument("R-hat needs equal-length chains");
    const double mu = std::accumulate(h.begin(), h.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : h) ss += (x - mu) * (x - mu);
    means.push_back(mu);
    vars.push_back(ss / (n - 1.0));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  if (w <= 0.0) return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("ESS needs equal-length chains");
  if (n < 4) throw std::invalid_argument("ESS needs at least 4 draws per chain");

  std::vector<double> means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = std::accumulate(chains[j].begin(), chains[j].end(), 0.0) / n;
    double ss = 0.0;
    for (double x : chains[j]) ss += (x - means[j]) * (x - means[j]);
    vars[j] = ss / (n - 1.0);
  }
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  double b = 0.0;
  if (m > 1) {
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= static_cast<double>(n) / (m - 1.0);
  }
  const double var_plus = (n - 1.0) / n * w + b / n;
  const double total = static_cast<double>(m * n);
  if (!(var_plus > 0.0)) return total;

  const auto rho_at = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t)
        s += (chains[j][t] - means[j]) * (chains[j][t + lag] - means[j]);
      acov += s / n;
    }
    acov /= m;
    return 1.0 - (w - acov) / var_plus;
  };

  double tau = -1.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double pair = rho_at(lag) + rho_at(lag + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    previous_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

PosteriorEnsemble run_mcmc(const CalibrationProblem& problem, const McmcConfig& config) {
  HiddenTruthGuard guard;
  config.validate();
  problem.likelihood.validate();
  for (int d : problem.likelihood.days)
    if (!problem.observations.at_day(d))
      throw std::invalid_argument(fmt::format("no observation on assimilated day {}", d));

  std::vector<ChainResult> chains(static_cast<std::size_t>(config.chains));
  parallel_for(chains.size(), config.threads, [&](std::size_t c) {
    HiddenTruthGuard worker_guard;
    chains[c] = run_chain(problem, config, static_cast<int>(c));
  });

  PosteriorEnsemble ensemble;
  for (const auto& c : chains) {
    ensemble.samples.insert(ensemble.samples.end(), c.retained.begin(), c.retained.end());
    ensemble.diagnostics.acceptance.push_back(c.acceptance);
  }
  ensemble.diagnostics.r_hat_threshold = config.r_hat_threshold;
  for (int i = 0; i < kDim; ++i) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& c : chains) {
      std::vector<double> v;
      v.reserve(c.retained.size());
      for (const auto& s : c.retained) v.push_back(s.as_array()[i]);
      per_chain.push_back(std::move(v));
    }
    ensemble.diagnostics.r_hat[i] = split_r_hat(per_chain);
    ensemble.diagnostics.ess[i] = effective_sample_size(per_chain);
    if (!(ensemble.diagnostics.r_hat[i] <= config.r_hat_threshold))
      ensemble.diagnostics.converged = false;
  }
  return ensemble;
}

PosteriorEnsemble calibrate(const ObservationSet& observations, const PriorSpec& prior,
                            const LikelihoodSpec& likelihood, const FixedParameters& fixed,
                            const SimulationGrid& grid, const McmcConfig& config) {
  HiddenTruthGuard guard;
  observations.validate();
  const auto day0 = observations.at_day(0.0);
  if (!day0) throw std::invalid_argument("calibration needs the day-0 observation");
  CalibrationProblem problem{
      .observations = observations,
      .prior = EffectivePrior::from(prior, step1_update_initial_burden(*day0, likelihood.sigma)),
      .likelihood = likelihood,
      .fixed = fixed,
      .regimen = TreatmentRegimen::standard_of_care(),
      .grid = grid,
  };
  return run_mcmc(problem, config);
}

}  // namespace dtwin
