#include "dtwin/trust_region.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dtwin {

namespace {

double sum(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); }

double inf_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct Vertex {
  std::vector<double> x;
  double f;
};

}  // namespace

bool BudgetBox::in_box(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  return true;
}

bool BudgetBox::feasible(std::span<const double> x, double tol) const {
  return x.size() == dimension() && in_box(x) && sum(x) <= budget + tol;
}

std::vector<double> BudgetBox::project(std::span<const double> x) const {
  std::vector<double> p(x.begin(), x.end());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
  const double floor_sum = sum(lower);
  const double excess = sum(p) - floor_sum;
  const double room = budget - floor_sum;
  if (sum(p) > budget && excess > 0.0) {
    const double scale = std::max(0.0, room) / excess;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = lower[i] + (p[i] - lower[i]) * scale;
    // Absorb rounding so the result is feasible to the last bit.
    for (std::size_t i = 0; i < p.size() && sum(p) > budget; ++i)
      p[i] = std::max(lower[i], p[i] - (sum(p) - budget));
  }
  return p;
}

void BudgetBox::validate() const {
  if (lower.size() != upper.size() || lower.empty())
    throw std::invalid_argument("box bounds must have matching nonzero dimension");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i])) throw std::invalid_argument("box lower bound exceeds upper");
  if (sum(lower) > budget) throw std::invalid_argument("budget excludes the whole box");
}

bool preferred(double f_a, std::span<const double> x_a, double f_b, std::span<const double> x_b) {
  if (f_a != f_b) return f_a < f_b;
  const double sa = sum(x_a);
  const double sb = sum(x_b);
  if (sa != sb) return sa < sb;
  return std::lexicographical_compare(x_a.begin(), x_a.end(), x_b.begin(), x_b.end());
}

std::vector<double> linear_step(const BudgetBox& set, std::span<const double> center,
                                std::span<const double> gradient, double radius) {
  const std::size_t n = set.dimension();
  std::vector<double> lo(n), hi(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = std::max(set.lower[i], center[i] - radius);
    hi[i] = std::min(set.upper[i], center[i] + radius);
    x[i] = lo[i];
  }
  double room = set.budget - sum(x);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gradient[a] < gradient[b]; });
  for (std::size_t i : order) {
    if (gradient[i] >= 0.0 || room <= 0.0) break;
    const double inc = std::min(hi[i] - lo[i], room);
    x[i] += inc;
    room -= inc;
  }
  return x;
}

TrustRegionResult minimize_linear_models(const std::function<double(std::span<const double>)>& f,
                                         const BudgetBox& set, std::span<const double> start,
                                         const TrustRegionOptions& options) {
  set.validate();
  const std::size_t n = set.dimension();
  if (start.size() != n) throw std::invalid_argument("start point has the wrong dimension");
  if (!(options.rho_begin > 0.0 && options.rho_end > 0.0 && options.rho_end <= options.rho_begin))
    throw std::invalid_argument("need 0 < rho_end <= rho_begin");
  if (options.max_evaluations < 1) throw std::invalid_argument("need at least one evaluation");

  TrustRegionResult result;
  int& evals = result.evaluations;
  const auto evaluate = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };

  Vertex best{set.project(start), 0.0};
  best.f = evaluate(best.x);
  double rho = options.rho_begin;

  // Box-feasible point offset from `base` along `dir`, scaled to length rho.
  const auto offset_point = [&](const std::vector<double>& base, const Eigen::VectorXd& dir) {
    std::vector<double> p(n);
    const double scale = rho / std::max(dir.cwiseAbs().maxCoeff(), 1e-300);
    bool fits = true;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = base[i] + scale * dir[static_cast<Eigen::Index>(i)];
      fits = fits && p[i] >= set.lower[i] && p[i] <= set.upper[i];
    }
    if (!fits) {
      for (std::size_t i = 0; i < n; ++i) p[i] = base[i] - scale * dir[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = std::clamp(p[i], set.lower[i], set.upper[i]);
    return p;
  };

  std::vector<Vertex> others;
  const auto rebuild_simplex = [&]() {
    others.clear();
    for (std::size_t i = 0; i < n && evals < options.max_evaluations; ++i) {
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      dir[static_cast<Eigen::Index>(i)] = 1.0;
      auto p = offset_point(best.x, dir);
      const double fp = evaluate(p);
      others.push_back({std::move(p), fp});
    }
  };

  // Promote a feasible vertex that beats the incumbent.
  const auto promote = [&]() {
    for (auto& v : others) {
      if (set.feasible(v.x) && preferred(v.f, v.x, best.f, best.x)) std::swap(v, best);
    }
  };

  rebuild_simplex();
  promote();

  while (evals < options.max_evaluations) {
    ++result.iterations;
    if (others.size() < n) break;

    Eigen::MatrixXd edges(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd df(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        edges(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = others[i].x[j] - best.x[j];
      df[static_cast<Eigen::Index>(i)] = others[i].f - best.f;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);
    const double volume = std::abs(lu.determinant()) / std::pow(rho, static_cast<double>(n));

    // Farthest vertex, for geometry maintenance.
    std::size_t far = 0;
    double far_dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = inf_distance(others[i].x, best.x);
      if (d > far_dist) {
        far_dist = d;
        far = i;
      }
    }

    if (!lu.isInvertible() || volume < 1e-6) {
      // Degenerate simplex: replace the farthest vertex along the direction
      // orthogonal to the remaining edges.
      Eigen::VectorXd dir;
      if (lu.isInvertible()) {
        dir = lu.inverse().col(static_cast<Eigen::Index>(far));
      } else {
        rebuild_simplex();
        promote();
        continue;
      }
      auto p = offset_point(best.x, dir);
      others[far] = {p, evaluate(p)};
      promote();
      continue;
    }

    const Eigen::VectorXd g = lu.solve(df);
    std::vector<double> grad(g.data(), g.data() + n);
    const auto trial = linear_step(set, best.x, grad, rho);
    double predicted = 0.0;
    for (std::size_t i = 0; i < n; ++i) predicted -= grad[i] * (trial[i] - best.x[i]);
    const double step_len = inf_distance(trial, best.x);
    const double scale = std::abs(best.f) + 1.0;

    if (predicted <= 1e-14 * scale || step_len < 0.1 * rho) {
      if (far_dist > 2.0 * rho) {
        Eigen::VectorXd dir = lu.inverse().col(static_cast<Eigen::Index>(far));
        auto p = offset_point(best.x, dir);
        others[far] = {p, evaluate(p)};
        promote();
        continue;
      }
      if (rho <= options.rho_end) break;
      rho = std::max(options.rho_end, 0.5 * rho);
      continue;
    }

    const double f_trial = evaluate(trial);
    const double ratio = (best.f - f_trial) / predicted;
    if (set.feasible(trial) && preferred(f_trial, trial, best.f, best.x)) {
      // Old incumbent stays in the simplex in place of the farthest vertex
      // from the new one.
      std::size_t drop = 0;
      double drop_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = inf_distance(others[i].x, trial);
        if (d > drop_dist) {
          drop_dist = d;
          drop = i;
        }
      }
      others[drop] = std::move(best);
      best = {trial, f_trial};
      if (ratio > 0.7 && step_len >= 0.99 * rho) rho = std::min(options.rho_begin, 2.0 * rho);
    } else {
      // Keep the rejected point if it replaces a far or poor vertex.
      std::size_t worst = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (others[i].f > others[worst].f) worst = i;
      const std::size_t drop = far_dist > 2.0 * rho ? far : worst;
      if (far_dist > 2.0 * rho || f_trial < others[worst].f) others[drop] = {trial, f_trial};
      if (ratio < 0.1 && far_dist <= 2.0 * rho) {
        if (rho <= options.rho_end) break;
        rho = std::max(options.rho_end, 0.5 * rho);
      }
    }
  }

  result.x = best.x;
  result.f = best.f;
  result.final_rho = rho;
  return result;
}

}  // namespace dtwin
