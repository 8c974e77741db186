#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "localscore/expr.hpp"
#include "localscore/rules.hpp"

namespace localscore::estimation {

// Parametric unnormalized log-density l(x; theta) in x and the named
// parameter symbols; exp(l) need not be normalized ("up to a multiplicative
// factor" is the whole point of score matching).
struct ParametricModel {
  QFunction logdensity;
  std::vector<std::string> params;
  double lo, hi;
  std::optional<std::vector<std::pair<double, double>>> param_bounds;
  Bindings opaque_bindings;
};

// Rewrites the rule's score function as an expression in (x, theta) by
// substituting q0 -> 1 and q_j -> r_j, where r_0 = 1 and
// r_{j+1} = d/dx r_j + l' r_j. Valid precisely because key scores are
// 0-homogeneous: the normalizing constant cancels symbolically.
QFunction score_of_model(const rules::ScoringRule& rule, const ParametricModel& model);

enum class Method { ClosedForm, Newton, NelderMead, Degenerate };

struct EstimationResult {
  std::vector<double> theta;
  double total_score = 0.0;
  double score_gradient_norm = 0.0;
  int iterations = 0;
  Method method = Method::Newton;
  bool degenerate = false;
  std::string diagnostic;
};

// Minimizes the total empirical score by Newton iteration on the estimating
// equation (symbolic gradient and Hessian in theta), with a seeded 5-start
// Nelder-Mead fallback. A score whose estimating function does not depend on
// the data (the improper Hyvarinen-on-(0,inf) case) is flagged degenerate
// instead of returning a bogus estimate.
EstimationResult estimate(const rules::ScoringRule& rule, const ParametricModel& model,
                          const std::vector<double>& data, std::uint64_t seed = 0);

// Closed form for the selection model l = kappa(x) - (x - theta)^2 / 2:
// theta-hat = mean(x_i - kappa'(x_i)).
double selection_model_estimator(const std::function<double(double)>& kappa_prime,
                                 const std::vector<double>& data);

struct UnbiasednessReport {
  std::vector<double> mean;             // Monte-Carlo mean of sigma(X, theta0)
  std::vector<double> stderr_of_mean;
  double max_ratio = 0.0;               // max_i |mean_i| / stderr_i
  int n = 0;
  bool degenerate = false;
};

UnbiasednessReport unbiasedness_check(const rules::ScoringRule& rule,
                                      const ParametricModel& model,
                                      const std::vector<double>& theta0, int n_mc,
                                      std::uint64_t seed = 0);

// Inverse-CDF sampling on a 4096-point grid over the truncated support.
// Sampling is the only place numeric normalization enters; the estimator
// itself never needs it.
std::vector<double> sample_model(const ParametricModel& model, const std::vector<double>& theta,
                                 int n, std::uint64_t seed);

// One value per line, or CSV with 0-based column selection; non-finite
// values are rejected.
std::vector<double> read_data_file(const std::string& path, int column = 0);

}  // namespace localscore::estimation
