#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dtwin {

/// Feasible set { x : lower <= x <= upper, sum(x) <= budget }.
struct BudgetBox {
  std::vector<double> lower;
  std::vector<double> upper;
  double budget = 0.0;

  std::size_t dimension() const { return lower.size(); }
  bool in_box(std::span<const double> x) const;
  bool feasible(std::span<const double> x, double tol = 1e-12) const;
  /// Nearest-by-scaling feasible point: clip to the box, then shrink the
  /// part above `lower` uniformly until the budget holds.
  std::vector<double> project(std::span<const double> x) const;
  void validate() const;
};

struct TrustRegionOptions {
  double rho_begin = 1.0;
  double rho_end = 1e-3;
  int max_evaluations = 100;
};

struct TrustRegionResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  int iterations = 0;
  double final_rho = 0.0;
};

/// Strict preference used for incumbents: lower f, then lower sum(x), then
/// lexicographically smaller x.
bool preferred(double f_a, std::span<const double> x_a, double f_b, std::span<const double> x_b);

/// Minimizer of the linear function g.x over the box-budget set intersected
/// with the infinity-norm ball of radius `radius` around `center`
/// (center must be feasible). Exact greedy solution of the continuous
/// knapsack LP.
std::vector<double> linear_step(const BudgetBox& set, std::span<const double> center,
                                std::span<const double> gradient, double radius);

/// Derivative-free minimization by linear approximation on a simplex.
///
/// Keeps n + 1 interpolation points around the best feasible point, fits the
/// linear model through them, and steps to the minimizer of that model in an
/// infinity-norm trust region of radius rho intersected with the feasible
/// set. Interpolation points only need to lie in the box; incumbents are
/// always feasible. rho shrinks by half when the model stops predicting
/// progress on a well-poised simplex, down to rho_end or the evaluation cap.
/// The objective is only ever called at points inside the box.
TrustRegionResult minimize_linear_models(const std::function<double(std::span<const double>)>& f,
                                         const BudgetBox& set, std::span<const double> start,
                                         const TrustRegionOptions& options);

}  // namespace dtwin
