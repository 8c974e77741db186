#include "localscore/propriety.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "localscore/operators.hpp"
#include "quadrature.hpp"

namespace localscore::propriety {

namespace {

void require_one_homogeneous(const QFunction& phi) {
  if (!ops::is_homogeneous(phi, Rational(1)).zero)
    throw DomainError("generator phi must be 1-homogeneous");
}

std::map<Var, QFunction> jet_swap_map(int up_to) {
  std::map<Var, QFunction> m;
  for (int j = 0; j <= up_to; ++j) m.emplace(Var::q(j), QFunction::p(j));
  return m;
}

}  // namespace

// --- concavity ---------------------------------------------------------------

ConcavityReport check_concavity(const QFunction& phi, int sample_count, std::uint64_t seed) {
  require_one_homogeneous(phi);
  int m = phi.order();
  if (m <= 0) {
    // phi = c(x) q0 is linear in the jets: concave, never strictly
    return {ConcavityVerdict::Concave, std::nullopt, 0};
  }

  QFunction Phi = phi.substitute({{Var::q(0), QFunction(1)}});
  // Exact Hessian of Phi in u = (q_1..q_m); finite differencing cannot reach
  // the 1e-10 strictness threshold near flat points (see Phi = -u1^4).
  std::vector<std::vector<QFunction>> H(static_cast<std::size_t>(m));
  for (int i = 1; i <= m; ++i) {
    auto di = Phi.partial(Var::q(i));
    for (int j = 1; j <= m; ++j)
      H[static_cast<std::size_t>(i - 1)].push_back(di.partial(Var::q(j)));
  }

  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::uniform_real_distribution<double> ux(0.1, 3.0);
  std::uniform_real_distribution<double> uu(-2.5, 2.5);

  int used = 0;
  bool all_strict = true;
  for (int n = 0; n < sample_count; ++n) {
    JetPoint pt;
    pt.x = ux(rng);
    pt.q.assign(static_cast<std::size_t>(m) + 1, 0.0);
    pt.q[0] = 1.0;
    if (n > 0) {
      for (int j = 1; j <= m; ++j) pt.q[static_cast<std::size_t>(j)] = uu(rng);
    }
    // n == 0 probes u = 0, where even-degree flats lose strictness

    Eigen::MatrixXd hess(m, m);
    bool ok = true;
    for (int i = 0; i < m && ok; ++i) {
      for (int j = 0; j < m && ok; ++j) {
        try {
          hess(i, j) = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].evaluate(pt);
        } catch (const EvalError&) {
          ok = false;
        }
      }
    }
    if (!ok) continue;
    ++used;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (hess + hess.transpose()));
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (hi > 1e-7) {
      ConcavityWitness w;
      w.x = pt.x;
      w.u.assign(pt.q.begin() + 1, pt.q.end());
      w.eigenvalue = hi;
      return {ConcavityVerdict::NotConcave, w, used};
    }
    if (hi >= -1e-10) all_strict = false;
  }
  if (used == 0) throw EvalError("concavity check: evaluation singular at every sample");
  return {all_strict ? ConcavityVerdict::StrictlyConcave : ConcavityVerdict::Concave,
          std::nullopt, used};
}

// --- divergence decomposition ---------------------------------------------------

Quadrature integral_divergence(const QFunction& phi, const DensitySpec& P,
                               const DensitySpec& Q) {
  require_one_homogeneous(phi);
  int m = std::max(phi.order(), 0);

  // One combined expression in both jet families. Gauge choices like
  // -(1/2) q2 {1 + ln(q1/q0)} are real only in combination (the paper's
  // d0* integrands), so the pieces must cancel inside a single evaluation.
  QFunction integrand_expr = phi - phi.substitute(jet_swap_map(m));
  for (int k = 0; k <= m; ++k) {
    QFunction pk = phi.partial(Var::q(k));
    if (pk.is_zero().zero) continue;
    integrand_expr = integrand_expr + (QFunction::p(k) - QFunction::q(k)) * pk;
  }
  integrand_expr = integrand_expr.canonical();

  auto [slo, shi] = P.support();
  auto integrand = [&](double x) {
    JetPoint pt;
    pt.x = x;
    pt.q = Q.jets(x, m);
    pt.p = P.jets(x, m);
    return integrand_expr.evaluate(pt);
  };
  auto r = detail::integrate(integrand, slo, shi, 1e-8);
  return {r.value, r.abs_err};
}

QFunction boundary_divergence_expr(const QFunction& phi) {
  require_one_homogeneous(phi);
  int m = phi.order();
  QFunction acc = 0;
  for (int r = 0; r < m; ++r) {
    QFunction g = ops::B(r, phi);
    if (g.is_zero().zero) continue;
    QFunction gp = g.substitute(jet_swap_map(g.order()));
    acc = acc + QFunction::p(r) * (g - gp);
  }
  return acc.canonical();
}

namespace {

// Evaluation of a boundary expression at x, robust at the tails: when the
// expression is 0-homogeneous in the q-jets and 1-homogeneous in the p-jets
// (every d_b, d-hat and H_b is), it is evaluated at the ratio jets
// (q0 = p0 = 1) and scaled by p(x), so underflowing densities degrade to an
// exact 0 instead of 0/0.
class BoundaryEvaluator {
 public:
  BoundaryEvaluator(QFunction expr, const DensitySpec& P, const DensitySpec& Q)
      : expr_(std::move(expr)), p_(P), q_(Q) {
    mq_ = expr_.order();
    mp_ = expr_.pjet_order();
    QFunction eq = 0, ep = 0;
    for (int j = 0; j <= mq_; ++j) eq = eq + QFunction::q(j) * expr_.partial(Var::q(j));
    for (int j = 0; j <= mp_; ++j) ep = ep + QFunction::p(j) * expr_.partial(Var::p(j));
    scaled_ = eq.is_zero().zero && equal_functions(ep, expr_).zero;
  }

  double at(double x) const {
    JetPoint pt;
    pt.x = x;
    if (scaled_) {
      pt.q = mq_ >= 0 ? q_.ratios(x, mq_) : std::vector<double>{1.0};
      pt.p = mp_ >= 0 ? p_.ratios(x, mp_) : std::vector<double>{1.0};
      double p0 = p_.density(x);
      return p0 == 0.0 ? 0.0 : p0 * expr_.evaluate(pt);
    }
    pt.q = q_.jets(x, std::max(mq_, 0));
    pt.p = p_.jets(x, std::max(mp_, 0));
    return expr_.evaluate(pt);
  }

 private:
  QFunction expr_;
  const DensitySpec& p_;
  const DensitySpec& q_;
  int mq_, mp_;
  bool scaled_;
};

std::vector<double> approach_sequence(double end, double other, bool end_is_finite,
                                      bool lower_end) {
  std::vector<double> xs;
  for (int k = 1; k <= 12; ++k) {
    double step = std::pow(10.0, -0.5 * k);
    double x;
    if (!end_is_finite) {
      x = (lower_end ? -1.0 : 1.0) * std::pow(10.0, 0.5 * k);
    } else if (std::isfinite(other)) {
      x = end + (lower_end ? 1.0 : -1.0) * std::abs(other - end) * step;
    } else {
      x = end + (lower_end ? 1.0 : -1.0) * step;
    }
    xs.push_back(x);
  }
  return xs;
}

EndpointDiagnostic classify(const BoundaryEvaluator& ev, const std::vector<double>& xs) {
  EndpointDiagnostic d;
  for (double x : xs) {
    try {
      double v = ev.at(x);
      if (std::isfinite(v)) d.sequence.emplace_back(x, v);
    } catch (const EvalError&) {
      // singular point: skip, the verdict works from the surviving tail
    }
  }
  if (d.sequence.size() < 4) {
    d.verdict = LimitVerdict::Inconclusive;
    return d;
  }
  std::size_t n = d.sequence.size();
  double last = d.sequence[n - 1].second;
  double prev = d.sequence[n - 2].second;
  double mid = d.sequence[n / 2].second;
  d.limit = last;
  double tail_max = std::max({std::abs(last), std::abs(prev), std::abs(d.sequence[n - 3].second)});
  if (tail_max < 1e-6 && std::abs(last) <= std::abs(mid) + 1e-9) {
    d.verdict = LimitVerdict::Vanishes;
  } else if (std::abs(last) > 1e-6 &&
             std::abs(last - prev) < 0.05 * std::abs(last)) {
    d.verdict = LimitVerdict::Nonzero;
  } else if (std::abs(last) > 10.0 * std::abs(mid) && std::abs(last) > 1.0) {
    d.verdict = LimitVerdict::Divergent;
  } else {
    d.verdict = LimitVerdict::Inconclusive;
  }
  return d;
}

BoundaryReport diagnose(const BoundaryEvaluator& ev, const DensitySpec& P) {
  BoundaryReport rep;
  rep.lower = classify(ev, approach_sequence(P.lo(), P.hi(), std::isfinite(P.lo()), true));
  rep.upper = classify(ev, approach_sequence(P.hi(), P.lo(), std::isfinite(P.hi()), false));
  return rep;
}

}  // namespace

double boundary_divergence(const QFunction& phi, const DensitySpec& P, const DensitySpec& Q,
                           double x) {
  BoundaryEvaluator ev(boundary_divergence_expr(phi), P, Q);
  return ev.at(x);
}

BoundaryReport boundary_limit_diagnostic(const QFunction& phi, const DensitySpec& P,
                                         const DensitySpec& Q) {
  BoundaryEvaluator ev(boundary_divergence_expr(phi), P, Q);
  return diagnose(ev, P);
}

BoundaryReport boundary_limit_diagnostic_expr(const QFunction& expr, const DensitySpec& P,
                                              const DensitySpec& Q) {
  BoundaryEvaluator ev(expr, P, Q);
  return diagnose(ev, P);
}

// --- entropy ----------------------------------------------------------------------

EntropyReport entropy(const QFunction& phi, const DensitySpec& P) {
  require_one_homogeneous(phi);
  int m = std::max(phi.order(), 0);
  auto [slo, shi] = P.support();
  // phi(p) = p0 * phi(1, ratios) by 1-homogeneity
  auto integrand = [&](double x) {
    JetPoint pt;
    pt.x = x;
    pt.q = P.ratios(x, m);
    double p0 = P.density(x);
    return p0 == 0.0 ? 0.0 : p0 * phi.evaluate(pt);
  };
  auto h0 = detail::integrate(integrand, slo, shi, 1e-8);

  QFunction hb = ops::C(phi);
  int mh = std::max(hb.order(), 0);
  auto hb_at = [&](double x) {
    JetPoint pt;
    pt.x = x;
    pt.q = P.ratios(x, mh);
    double p0 = P.density(x);
    return p0 == 0.0 ? 0.0 : p0 * hb.evaluate(pt);
  };
  auto limit_of = [&](bool lower_end) {
    double end = lower_end ? P.lo() : P.hi();
    double other = lower_end ? P.hi() : P.lo();
    auto xs = approach_sequence(end, other, std::isfinite(end), lower_end);
    double v = 0.0;
    for (double x : xs) {
      try {
        v = hb_at(x);
      } catch (const EvalError&) {
      }
    }
    return v;
  };
  return {h0.value, h0.abs_err, limit_of(true), limit_of(false)};
}

// --- gauge change ------------------------------------------------------------------

GaugeShiftReport gauge_shift_report(const QFunction& phi, const QFunction& psi,
                                    const DensitySpec& P, const DensitySpec& Q) {
  if (!ops::is_homogeneous(psi, Rational(1)).zero)
    throw DomainError("gauge function psi must be 1-homogeneous");

  int mp = std::max(psi.order(), 0);
  QFunction dhat = 0;
  for (int k = 0; k <= mp; ++k) {
    QFunction pk = psi.partial(Var::q(k));
    if (pk.is_zero().zero) continue;
    dhat = dhat + QFunction::p(k) * pk;
  }
  dhat = (dhat - psi.substitute(jet_swap_map(mp))).canonical();

  BoundaryEvaluator ev(dhat, P, Q);
  auto lower = classify(ev, approach_sequence(P.lo(), P.hi(), std::isfinite(P.lo()), true));
  auto upper = classify(ev, approach_sequence(P.hi(), P.lo(), std::isfinite(P.hi()), false));

  GaugeShiftReport rep{0, 0, 0, 0, 0, dhat};
  rep.dhat_lower = lower.limit;
  rep.dhat_upper = upper.limit;
  rep.d0_base = integral_divergence(phi, P, Q).value;
  QFunction phistar = (phi + ops::D(psi)).canonical();
  rep.d0_transformed = integral_divergence(phistar, P, Q).value;
  rep.gap = std::abs(rep.d0_transformed - (rep.d0_base + rep.dhat_upper - rep.dhat_lower));
  return rep;
}

// --- full report ---------------------------------------------------------------------

DivergenceReport divergence_report(const QFunction& phi, const DensitySpec& P,
                                   const DensitySpec& Q) {
  DivergenceReport rep;
  auto d0 = integral_divergence(phi, P, Q);
  rep.d0 = d0.value;
  rep.quadrature_abs_err = d0.abs_err;
  rep.boundary = boundary_limit_diagnostic(phi, P, Q);
  rep.d_minus = rep.boundary.lower.verdict == LimitVerdict::Vanishes ? 0.0 : rep.boundary.lower.limit;
  rep.d_plus = rep.boundary.upper.verdict == LimitVerdict::Vanishes ? 0.0 : -rep.boundary.upper.limit;
  rep.total = rep.d0 + rep.d_plus + rep.d_minus;
  return rep;
}

ScoreSplit expected_score_decomposition(const QFunction& phi, const DensitySpec& P,
                                        const DensitySpec& Q) {
  require_one_homogeneous(phi);
  int m = std::max(phi.order(), 0);
  std::vector<QFunction> partials;
  for (int k = 0; k <= m; ++k) partials.push_back(phi.partial(Var::q(k)));
  QFunction s = ops::Lambda(phi);
  int ms = std::max(s.order(), 0);

  auto [slo, shi] = P.support();
  auto total_integrand = [&](double x) {
    JetPoint pt;
    pt.x = x;
    pt.q = Q.ratios(x, ms);  // s is 0-homogeneous
    double p0 = P.density(x);
    return p0 == 0.0 ? 0.0 : p0 * s.evaluate(pt);
  };
  auto s0_integrand = [&](double x) {
    auto pj = P.jets(x, m);
    JetPoint at_q;
    at_q.x = x;
    at_q.q = Q.jets(x, m);
    double val = 0.0;
    for (int k = 0; k <= m; ++k)
      val += pj[static_cast<std::size_t>(k)] * partials[static_cast<std::size_t>(k)].evaluate(at_q);
    return val;
  };
  auto total = detail::integrate(total_integrand, slo, shi, 1e-8);
  auto s0 = detail::integrate(s0_integrand, slo, shi, 1e-8);

  // S_b = sum_r p_r B_r phi(q); S_+/- = -/+ S_b at the end-points
  QFunction sb = 0;
  for (int r = 0; r < phi.order(); ++r) {
    QFunction g = ops::B(r, phi);
    if (g.is_zero().zero) continue;
    sb = sb + QFunction::p(r) * g;
  }
  sb = sb.canonical();
  BoundaryEvaluator ev(sb, P, Q);
  auto lower = classify(ev, approach_sequence(P.lo(), P.hi(), std::isfinite(P.lo()), true));
  auto upper = classify(ev, approach_sequence(P.hi(), P.lo(), std::isfinite(P.hi()), false));

  ScoreSplit split{};
  split.total = total.value;
  split.integral = s0.value;
  split.s_plus = -upper.limit;
  split.s_minus = lower.limit;
  split.err = total.abs_err + s0.abs_err;
  split.gap = std::abs(split.total - (split.integral + split.s_plus + split.s_minus));
  return split;
}

}  // namespace localscore::propriety
