#include "localscore/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <random>
#include <sstream>

#include "localscore/density.hpp"
#include "localscore/operators.hpp"

namespace localscore::estimation {

namespace {

constexpr double kGradTol = 1e-8;

void validate_model(const ParametricModel& model) {
  if (model.params.empty()) throw DomainError("model has no parameters");
  if (!(model.lo < model.hi)) throw DomainError("model domain must be a nonempty open interval");
  if (model.logdensity.order() != kOrderQFree || model.logdensity.pjet_order() != kOrderQFree)
    throw DomainError("a model log-density is an expression in x and parameters only");
}

Bindings bind_theta(const ParametricModel& model, const std::vector<double>& theta) {
  if (theta.size() != model.params.size())
    throw DomainError("parameter vector length does not match the model");
  Bindings b = model.opaque_bindings;
  for (std::size_t i = 0; i < theta.size(); ++i) b.params[model.params[i]] = theta[i];
  return b;
}

// Score expression plus its symbolic theta-derivatives.
struct Objective {
  QFunction S;
  std::vector<QFunction> grad;                // sigma_i = dS/dtheta_i
  std::vector<std::vector<QFunction>> hess;   // d sigma_i / dtheta_j
  const ParametricModel* model;

  double total(const std::vector<double>& theta, const std::vector<double>& data) const {
    Bindings b = bind_theta(*model, theta);
    JetPoint pt;
    double acc = 0.0;
    for (double x : data) {
      pt.x = x;
      acc += S.evaluate(pt, b);
    }
    return acc;
  }

  Eigen::VectorXd gradient(const std::vector<double>& theta,
                           const std::vector<double>& data) const {
    Bindings b = bind_theta(*model, theta);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<int>(grad.size()));
    JetPoint pt;
    for (double x : data) {
      pt.x = x;
      for (int i = 0; i < g.size(); ++i) g[i] += grad[static_cast<std::size_t>(i)].evaluate(pt, b);
    }
    return g;
  }

  Eigen::MatrixXd hessian(const std::vector<double>& theta,
                          const std::vector<double>& data) const {
    int d = static_cast<int>(grad.size());
    Bindings b = bind_theta(*model, theta);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    JetPoint pt;
    for (double x : data) {
      pt.x = x;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          h(i, j) += hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(pt, b);
    }
    return h;
  }
};

Objective build_objective(const rules::ScoringRule& rule, const ParametricModel& model) {
  Objective obj;
  obj.model = &model;
  obj.S = score_of_model(rule, model);
  for (const auto& name : model.params) obj.grad.push_back(obj.S.partial(Var::param(name)));
  for (const auto& gi : obj.grad) {
    std::vector<QFunction> row;
    for (const auto& name : model.params) row.push_back(gi.partial(Var::param(name)));
    obj.hess.push_back(std::move(row));
  }
  return obj;
}

bool estimating_function_is_data_free(const Objective& obj) {
  for (const auto& gi : obj.grad) {
    if (!gi.partial(Var::x()).is_zero().zero) return false;
  }
  return true;
}

struct NewtonOutcome {
  std::vector<double> theta;
  double gnorm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

NewtonOutcome newton_solve(const Objective& obj, std::vector<double> theta,
                           const std::vector<double>& data) {
  NewtonOutcome out;
  int d = static_cast<int>(theta.size());
  for (int it = 0; it < 200; ++it) {
    out.iterations = it;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    try {
      g = obj.gradient(theta, data);
      h = obj.hessian(theta, data);
    } catch (const EvalError&) {
      return out;  // left the admissible region
    }
    out.gnorm = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(out.gnorm)) return out;
    if (out.gnorm <= kGradTol) {
      out.theta = theta;
      out.converged = true;
      return out;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
    if (!lu.isInvertible()) return out;
    Eigen::VectorXd step = lu.solve(g);
    double tnorm = 0.0;
    for (int i = 0; i < d; ++i) {
      theta[static_cast<std::size_t>(i)] -= step[i];
      tnorm = std::max(tnorm, std::abs(theta[static_cast<std::size_t>(i)]));
    }
    if (step.lpNorm<Eigen::Infinity>() < 1e-15 * (1.0 + tnorm)) {
      try {
        out.gnorm = obj.gradient(theta, data).lpNorm<Eigen::Infinity>();
      } catch (const EvalError&) {
        return out;
      }
      out.theta = theta;
      out.converged = out.gnorm <= kGradTol;
      return out;
    }
  }
  out.theta = theta;
  return out;
}

struct NMContext {
  const Objective* obj;
  const std::vector<double>* data;
};

double nm_eval(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<NMContext*>(params);
  std::vector<double> theta(v->size);
  for (std::size_t i = 0; i < v->size; ++i) theta[i] = gsl_vector_get(v, i);
  double penalty = 0.0;
  if (ctx->obj->model->param_bounds) {
    const auto& bounds = *ctx->obj->model->param_bounds;
    for (std::size_t i = 0; i < theta.size() && i < bounds.size(); ++i) {
      if (theta[i] < bounds[i].first) penalty += 1e6 * std::pow(bounds[i].first - theta[i], 2);
      if (theta[i] > bounds[i].second) penalty += 1e6 * std::pow(theta[i] - bounds[i].second, 2);
    }
  }
  try {
    return ctx->obj->total(theta, *ctx->data) + penalty;
  } catch (const EvalError&) {
    return 1e100;
  }
}

std::vector<double> nelder_mead(const Objective& obj, const std::vector<double>& data,
                                const std::vector<double>& start) {
  int d = static_cast<int>(start.size());
  NMContext ctx{&obj, &data};
  gsl_multimin_function f;
  f.n = static_cast<std::size_t>(d);
  f.f = &nm_eval;
  f.params = &ctx;

  gsl_vector* x = gsl_vector_alloc(f.n);
  gsl_vector* step = gsl_vector_alloc(f.n);
  for (int i = 0; i < d; ++i) {
    gsl_vector_set(x, static_cast<std::size_t>(i), start[static_cast<std::size_t>(i)]);
    gsl_vector_set(step, static_cast<std::size_t>(i), 0.5);
  }
  gsl_multimin_fminimizer* mins =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, f.n);
  gsl_multimin_fminimizer_set(mins, &f, x, step);

  std::vector<double> best = start;
  for (int it = 0; it < 500; ++it) {
    if (gsl_multimin_fminimizer_iterate(mins) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(mins), 1e-10) == GSL_SUCCESS) break;
  }
  for (int i = 0; i < d; ++i)
    best[static_cast<std::size_t>(i)] = gsl_vector_get(mins->x, static_cast<std::size_t>(i));
  gsl_multimin_fminimizer_free(mins);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return best;
}

}  // namespace

QFunction score_of_model(const rules::ScoringRule& rule, const ParametricModel& model) {
  validate_model(model);
  if (!ops::is_homogeneous(rule.s, Rational(0)).zero)
    throw DomainError("score_of_model requires a 0-homogeneous score function");
  int m = std::max(rule.s.order(), 0);
  QFunction lx = model.logdensity.partial(Var::x());
  std::map<Var, QFunction> sub;
  sub.emplace(Var::q(0), QFunction(1));
  QFunction r = QFunction(1);
  for (int j = 1; j <= m; ++j) {
    r = (r.partial(Var::x()) + lx * r).canonical();  // r_j = q^(j)/q
    sub.emplace(Var::q(j), r);
  }
  return rule.s.substitute(sub).canonical();
}

EstimationResult estimate(const rules::ScoringRule& rule, const ParametricModel& model,
                          const std::vector<double>& data, std::uint64_t seed) {
  validate_model(model);
  if (data.empty()) throw DomainError("estimation needs at least one observation");
  for (double x : data) {
    if (!(x > model.lo && x < model.hi))
      throw DomainError("data point outside the model domain");
  }

  Objective obj = build_objective(rule, model);
  EstimationResult res;

  if (estimating_function_is_data_free(obj)) {
    res.degenerate = true;
    res.method = Method::Degenerate;
    res.diagnostic =
        "estimating function does not depend on the data; the rule is improper "
        "for this model (boundary conditions fail)";
    return res;
  }

  std::size_t d = model.params.size();
  std::vector<double> start(d, 1.0);
  if (model.param_bounds) {
    for (std::size_t i = 0; i < d && i < model.param_bounds->size(); ++i)
      start[i] = 0.5 * ((*model.param_bounds)[i].first + (*model.param_bounds)[i].second);
  }

  NewtonOutcome newton = newton_solve(obj, start, data);
  if (newton.converged) {
    res.theta = newton.theta;
    res.method = Method::Newton;
    res.iterations = newton.iterations;
    res.score_gradient_norm = newton.gnorm;
    res.total_score = obj.total(res.theta, data);
    return res;
  }

  // Multi-start Nelder-Mead fallback, keeping the start with the best score.
  std::mt19937_64 rng(seed ^ 0xa24baed4963ee407ULL);
  std::uniform_real_distribution<double> spread(-3.0, 3.0);
  std::vector<double> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 5; ++s) {
    std::vector<double> st(d);
    for (auto& v : st) v = s == 0 ? 1.0 : spread(rng);
    if (model.param_bounds) {
      for (std::size_t i = 0; i < d && i < model.param_bounds->size(); ++i) {
        auto [blo, bhi] = (*model.param_bounds)[i];
        st[i] = std::clamp(st[i], blo, bhi);
      }
    }
    std::vector<double> cand = nelder_mead(obj, data, st);
    try {
      double sc = obj.total(cand, data);
      if (sc < best_score) {
        best_score = sc;
        best = cand;
      }
    } catch (const EvalError&) {
    }
  }
  if (best.empty()) throw DomainError("estimation failed to converge from any start");

  res.method = Method::NelderMead;
  NewtonOutcome polish = newton_solve(obj, best, data);
  if (polish.converged && obj.total(polish.theta, data) <= best_score + 1e-12) {
    res.theta = polish.theta;
    res.score_gradient_norm = polish.gnorm;
    res.iterations = polish.iterations;
  } else {
    res.theta = best;
    res.score_gradient_norm = obj.gradient(best, data).lpNorm<Eigen::Infinity>();
    res.iterations = 500;
  }
  res.total_score = obj.total(res.theta, data);
  return res;
}

double selection_model_estimator(const std::function<double(double)>& kappa_prime,
                                 const std::vector<double>& data) {
  if (data.empty()) throw DomainError("estimation needs at least one observation");
  double acc = 0.0;
  for (double x : data) acc += x - kappa_prime(x);
  return acc / static_cast<double>(data.size());
}

UnbiasednessReport unbiasedness_check(const rules::ScoringRule& rule,
                                      const ParametricModel& model,
                                      const std::vector<double>& theta0, int n_mc,
                                      std::uint64_t seed) {
  validate_model(model);
  Objective obj = build_objective(rule, model);
  UnbiasednessReport rep;
  rep.n = n_mc;
  rep.degenerate = estimating_function_is_data_free(obj);

  std::vector<double> xs = sample_model(model, theta0, n_mc, seed);
  std::size_t d = model.params.size();
  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  Bindings b = bind_theta(model, theta0);
  JetPoint pt;
  for (double x : xs) {
    pt.x = x;
    for (std::size_t i = 0; i < d; ++i) {
      double v = obj.grad[i].evaluate(pt, b);
      sum[i] += v;
      sumsq[i] += v * v;
    }
  }
  rep.mean.resize(d);
  rep.stderr_of_mean.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double m = sum[i] / n_mc;
    double var = std::max(sumsq[i] / n_mc - m * m, 0.0);
    rep.mean[i] = m;
    rep.stderr_of_mean[i] = std::sqrt(var / n_mc);
    double ratio = rep.stderr_of_mean[i] > 0.0
                       ? std::abs(m) / rep.stderr_of_mean[i]
                       : (std::abs(m) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  return rep;
}

std::vector<double> sample_model(const ParametricModel& model, const std::vector<double>& theta,
                                 int n, std::uint64_t seed) {
  validate_model(model);
  DensitySpec spec(model.logdensity, model.lo, model.hi, bind_theta(model, theta));
  auto [slo, shi] = spec.support();

  constexpr int kGrid = 4096;
  std::vector<double> xs(kGrid + 1), cdf(kGrid + 1, 0.0);
  double prev = 0.0;
  for (int i = 0; i <= kGrid; ++i) {
    double x = slo + (shi - slo) * i / kGrid;
    xs[static_cast<std::size_t>(i)] = x;
    double dens = spec.density_raw(x);
    if (i > 0)
      cdf[static_cast<std::size_t>(i)] = cdf[static_cast<std::size_t>(i - 1)] +
                                         0.5 * (prev + dens) * (shi - slo) / kGrid;
    prev = dens;
  }
  double z = cdf.back();
  if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("model density is not integrable");

  std::mt19937_64 rng(seed ^ 0x94d049bb133111ebULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) {
    double u = unif(rng) * z;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t hi_idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                               cdf.size() - 1);
    if (hi_idx == 0) hi_idx = 1;
    double c0 = cdf[hi_idx - 1], c1 = cdf[hi_idx];
    double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    v = xs[hi_idx - 1] + t * (xs[hi_idx] - xs[hi_idx - 1]);
  }
  return out;
}

std::vector<double> read_data_file(const std::string& path, int column) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file: " + path);
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // trim
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string body = line.substr(b, e - b + 1);
    if (body.empty()) continue;
    std::string cell = body;
    if (column > 0 || body.find(',') != std::string::npos) {
      std::stringstream ss(body);
      std::string tok;
      int c = 0;
      bool found = false;
      while (std::getline(ss, tok, ',')) {
        if (c++ == column) {
          cell = tok;
          found = true;
          break;
        }
      }
      if (!found)
        throw Error("line " + std::to_string(lineno) + ": no column " + std::to_string(column));
    }
    std::size_t used = 0;
    double v;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw Error("line " + std::to_string(lineno) + ": not a number: " + cell);
    }
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (used != cell.size())
      throw Error("line " + std::to_string(lineno) + ": not a number: " + cell);
    if (!std::isfinite(v))
      throw Error("line " + std::to_string(lineno) + ": non-finite value rejected");
    out.push_back(v);
  }
  return out;
}

}  // namespace localscore::estimation
