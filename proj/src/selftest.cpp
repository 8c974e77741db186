#include "localscore/selftest.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "localscore/charts.hpp"
#include "localscore/estimation.hpp"
#include "localscore/operators.hpp"
#include "localscore/propriety.hpp"
#include "localscore/rules.hpp"
#include "localscore/suite.hpp"

namespace localscore::selftest {

namespace op = localscore::ops;
namespace pr = localscore::propriety;
namespace est = localscore::estimation;
namespace ch = localscore::charts;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

QFunction Q(int j) { return QFunction::q(j); }

DensitySpec gaussian(double mu, double sigma) {
  std::ostringstream l;
  l << "-(x - (" << mu << "))^2/(2*(" << sigma << ")^2)";
  return DensitySpec(QFunction::parse(l.str()), -kInf, kInf);
}

DensitySpec exponential(double theta) {
  std::ostringstream l;
  l << "-(" << theta << ")*x";
  return DensitySpec(QFunction::parse(l.str()), 0.0, kInf);
}

QFunction power_rule_reference(int k) {
  QFunction y1 = Q(1) / Q(0);
  QFunction y2 = Q(2) / Q(0) - y1 * y1;
  return (QFunction(k - 1) * (pow(y1, Rational(k)) + QFunction(k) * pow(y1, Rational(k - 2)) * y2))
      .canonical();
}

QFunction random_concave_generator(std::mt19937_64& rng) {
  auto draw = [&rng] { return Rational(1 + static_cast<long>(rng() % 32), 16); };
  auto u = Q(1) / Q(0);
  QFunction g = -(QFunction::number(draw()) * u * u) - QFunction::number(draw()) * pow(u, Rational(4));
  return (Q(0) * g).canonical();
}

struct Crit {
  CriterionResult res;
  bool ok = true;
  std::ostringstream detail;

  Crit(std::string id, std::string title) {
    res.id = std::move(id);
    res.title = std::move(title);
  }
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << "FAILED: " << what;
    }
  }
  void note(const std::string& s) {
    if (detail.tellp() > 0) detail << "; ";
    detail << s;
  }
  CriterionResult finish() {
    res.passed = ok;
    res.detail = detail.str();
    if (res.passed && res.detail.empty()) res.detail = "ok";
    return res;
  }
};

CriterionResult c1_generation() {
  Crit c("C1", "generation: Hyvarinen rule and the power family, exact");
  auto hyv = rules::generate(QFunction::parse("-(1/2)*q1^2/q0"));
  c.require(hyv.s == QFunction::parse("q2/q0 - (1/2)*q1^2/q0^2"), "Hyvarinen generation");
  c.require(rules::power_family(1).s.is_zero().exact && rules::power_family(1).s.is_zero().zero,
            "power family k=1 is the zero rule");
  for (int k = 2; k <= 4; ++k) {
    c.require(rules::power_family(k).s == power_rule_reference(k),
              "power family k=" + std::to_string(k));
  }
  c.note("s(hyvarinen) = " + hyv.s.str());
  return c.finish();
}

CriterionResult c2_key_equation(std::uint64_t seed) {
  Crit c("C2", "key equation L s = 0 and E s = 0 on a 100-member random suite");
  std::mt19937_64 rng(seed + 2);
  int bad = 0;
  for (int i = 0; i < 100; ++i) {
    auto phi = suite::random_one_homogeneous(rng);
    auto rule = rules::generate(phi);
    if (!rule.key_equation.passed || !rule.zero_homogeneous.passed) ++bad;
  }
  c.require(bad == 0, std::to_string(bad) + " suite members failed");
  c.require(op::L(rules::log_score()) == QFunction(1), "L(-ln q0) = 1 exactly");
  c.note("100/100 generated rules satisfy L s = 0 and E s = 0");
  return c.finish();
}

CriterionResult c3_operator_identities(std::uint64_t seed) {
  Crit c("C3", "operator identity suite on 100 random q-functions");
  std::mt19937_64 rng(seed + 3);
  int bad = 0;
  std::string first_bad;
  auto check = [&](bool okv, const char* name) {
    if (!okv) {
      ++bad;
      if (first_bad.empty()) first_bad = name;
    }
  };
  for (int i = 0; i < 100; ++i) {
    auto f = suite::random_qfunction(rng);
    auto Df = op::D(f);
    auto Ef = op::E(f);
    auto Lf = op::Lambda(f);
    check(op::Lambda(Df).is_zero().zero, "Lambda D = 0");
    check(op::E(Df) == op::D(Ef).canonical(), "E D = D E");
    check(op::Lambda(Ef) == (op::E(Lf) + Lf).canonical(), "Lambda E = E Lambda + Lambda");
    check(op::Lambda(Ef) == op::Lambda(Q(0) * Lf).canonical(), "Lambda E = Lambda q0 Lambda");
    int r = static_cast<int>(rng() % 3);
    check(op::B(r, Df) == f.partial(Var::q(r)), "B_r D = d/dq_r");
    check(op::D(op::B(r, f)).canonical() == (f.partial(Var::q(r)) - op::B(r - 1, f)).canonical(),
          "D B_r = d/dq_r - B_{r-1}");
    check(op::C(Df) == Ef.canonical(), "C D = E");
    check(op::D(op::C(f)).canonical() == (Ef - Q(0) * Lf).canonical(), "D C = E - q0 Lambda");
    check(op::L(f) == (f - op::Lambda(Q(0) * f)).canonical(), "L = I - Lambda q0");
  }
  c.require(bad == 0,
            std::to_string(bad) + " identity checks failed (first: " + first_bad + ")");
  c.note("9 identities x 100 functions, exact canonical cancellation");
  return c.finish();
}

CriterionResult c4_parity(std::uint64_t seed) {
  Crit c("C4", "parity: no generated rule has odd order");
  std::mt19937_64 rng(seed + 4);
  int odd = 0;
  for (int i = 0; i < 100; ++i) {
    auto rule = rules::generate(suite::random_one_homogeneous(rng));
    int m = rule.s.order();
    if (m != kOrderQFree && m % 2 != 0) ++odd;
  }
  c.require(odd == 0, std::to_string(odd) + " odd-order rules found");
  c.note("0 odd-order rules among 100 generated suite members");
  return c.finish();
}

CriterionResult c5_gauge_invariance(std::uint64_t seed) {
  Crit c("C5", "gauge invariance Lambda(phi + D psi) = Lambda(phi)");
  std::mt19937_64 rng(seed + 5);
  int bad = 0;
  for (int i = 0; i < 50; ++i) {
    auto phi = suite::random_one_homogeneous(rng, {.max_order = 2});
    auto psi = suite::random_one_homogeneous(rng, {.max_order = 2});
    auto lhs = op::Lambda((phi + op::D(psi)).canonical());
    if (!equal_functions(lhs, op::Lambda(phi)).zero) ++bad;
  }
  c.require(bad == 0, std::to_string(bad) + " of 50 random pairs failed");

  auto phi = QFunction::parse("-(1/2)*q1^2/q0");
  auto phistar = rules::gauge_transform(phi, QFunction::parse("-(1/2)*q1*ln(q1/q0)"));
  c.require(phistar == QFunction::parse("-(1/2)*q2*(1 + ln(q1/q0))"),
            "phi* = -(1/2) q2 {1 + ln(q1/q0)}");
  c.require(op::Lambda(phistar) == QFunction::parse("q2/q0 - (1/2)*q1^2/q0^2"),
            "phi* generates the identical rule exactly");
  return c.finish();
}

CriterionResult c6_standard_gauge(std::uint64_t seed) {
  Crit c("C6", "standard gauge boundary entropy C(q0 s) = 0");
  auto check_rule = [&c](const rules::ScoringRule& rule, const std::string& name) {
    auto z = op::C((Q(0) * rule.s).canonical()).is_zero();
    c.require(z.zero, "C(q0 s) != 0 for " + name);
  };
  check_rule(rules::hyvarinen(), "hyvarinen");
  check_rule(rules::power_family(3), "power3");
  std::mt19937_64 rng(seed + 6);
  for (int i = 0; i < 20; ++i)
    check_rule(rules::generate(suite::random_one_homogeneous(rng, {.max_order = 2})),
               "random rule " + std::to_string(i));
  c.note("hyvarinen, power3 and 20 random generated rules");
  return c.finish();
}

CriterionResult c7_divergence(std::uint64_t seed) {
  Crit c("C7", "divergence numbers: Gaussian shifts, identity, nonnegativity");
  auto phi = QFunction::parse("-(1/2)*q1^2/q0");
  auto P = gaussian(0.0, 1.0);
  for (double mu : {0.5, 1.0, 2.0}) {
    auto d = pr::integral_divergence(phi, P, gaussian(mu, 1.0));
    double expect = mu * mu / 2.0;
    c.require(std::abs(d.value - expect) < 1e-6,
              "d0(N(0,1), N(" + std::to_string(mu) + ",1)) = " + std::to_string(d.value) +
                  " != mu^2/2");
  }
  auto same = pr::integral_divergence(phi, P, P);
  c.require(std::abs(same.value) < 1e-8, "d0(P, P) != 0");

  std::mt19937_64 rng(seed + 7);
  std::uniform_real_distribution<double> mus(-1.0, 1.0);
  std::uniform_real_distribution<double> sig(0.7, 1.6);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    auto cphi = random_concave_generator(rng);
    auto d = pr::integral_divergence(cphi, gaussian(mus(rng), sig(rng)), gaussian(mus(rng), sig(rng)));
    worst = std::min(worst, d.value);
    if (!(d.value >= -1e-8))
      c.require(false, "concave generator produced d0 = " + std::to_string(d.value));
  }
  std::ostringstream msg;
  msg << "worst concave-pair d0 = " << worst;
  c.note(msg.str());
  return c.finish();
}

CriterionResult c8_concavity() {
  Crit c("C8", "concavity verdicts with witness for the non-concave score");
  auto strict = pr::check_concavity(QFunction::parse("-(1/2)*q1^2/q0"), 60, 8);
  c.require(strict.verdict == pr::ConcavityVerdict::StrictlyConcave,
            "-(1/2) q1^2/q0 not reported strictly concave");
  auto flat = pr::check_concavity(QFunction::parse("-q1^4/q0^3"), 60, 8);
  c.require(flat.verdict == pr::ConcavityVerdict::Concave,
            "Phi = -u1^4 not reported concave (non-strict)");
  auto rule = rules::generate(QFunction::parse("-q1^4/q0^3"));
  auto bad = pr::check_concavity(rules::standard_gauge(rule), 60, 8);
  c.require(bad.verdict == pr::ConcavityVerdict::NotConcave,
            "s = 12 u1^2 u2 - 9 u1^4 not reported non-concave");
  c.require(bad.witness.has_value(), "no witness emitted");
  if (bad.witness) {
    std::ostringstream msg;
    msg << "witness at x = " << bad.witness->x << ", u = (";
    for (std::size_t i = 0; i < bad.witness->u.size(); ++i)
      msg << (i ? ", " : "") << bad.witness->u[i];
    msg << "), eigenvalue " << bad.witness->eigenvalue;
    c.note(msg.str());
  }
  return c.finish();
}

CriterionResult c9_estimation(std::uint64_t seed) {
  Crit c("C9", "estimation: closed forms, consistency, degeneracy, unbiasedness");

  est::ParametricModel normal;
  normal.logdensity = QFunction::parse("-x^2/2 + t1*x");
  normal.params = {"t1"};
  normal.lo = -kInf;
  normal.hi = kInf;
  auto xs = est::sample_model(normal, {0.4}, 200, seed + 9);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  auto res = est::estimate(rules::hyvarinen(), normal, xs, seed);
  c.require(!res.degenerate && std::abs(res.theta[0] - mean) < 1e-10,
            "normal-mean theta-hat != sample mean");

  est::ParametricModel expm;
  expm.logdensity = QFunction::parse("-t1*x");
  expm.params = {"t1"};
  expm.lo = 0.0;
  expm.hi = kInf;
  expm.param_bounds = {{{0.05, 50.0}}};
  auto small = est::sample_model(expm, {1.4}, 50, seed + 19);
  double sx = 0, sxx = 0;
  for (double x : small) {
    sx += x;
    sxx += x * x;
  }
  auto rese = est::estimate(rules::modified_hyvarinen(), expm, small, seed);
  c.require(std::abs(rese.theta[0] - 2 * sx / sxx) < 1e-10,
            "exponential theta-hat != 2 sum(x)/sum(x^2)");

  auto big = est::sample_model(expm, {2.0}, 100000, seed + 29);
  auto resb = est::estimate(rules::modified_hyvarinen(), expm, big, seed);
  double rel = std::abs(resb.theta[0] - 2.0) / 2.0;
  c.require(rel < 0.02, "consistency: |theta-hat - 2|/2 = " + std::to_string(rel));

  auto degen = est::estimate(rules::hyvarinen(), expm, small, seed);
  c.require(degen.degenerate, "unmodified Hyvarinen on the exponential model not flagged");

  est::ParametricModel selection;
  selection.logdensity = QFunction::parse("-x - (x - t1)^2/2");  // kappa(x) = -x
  selection.params = {"t1"};
  selection.lo = -kInf;
  selection.hi = kInf;
  auto rep = est::unbiasedness_check(rules::hyvarinen(), selection, {1.0}, 10000, seed + 39);
  c.require(!rep.degenerate && rep.max_ratio < 3.0,
            "selection-model |mean sigma|/stderr = " + std::to_string(rep.max_ratio));
  std::ostringstream msg;
  msg << "consistency rel err " << rel << ", unbiasedness ratio " << rep.max_ratio;
  c.note(msg.str());
  return c.finish();
}

CriterionResult c10_charts(std::uint64_t seed) {
  Crit c("C10", "chart transport: worked example, operator identities, boundary verdicts");
  auto chart = ch::ChartMap::make(QFunction::parse("ln(x)"), QFunction::parse("exp(x)"));
  c.require(ch::jet_transport(chart, 0) == QFunction::parse("x*q0"), "qbar0");
  c.require(ch::jet_transport(chart, 1) == QFunction::parse("x*q0 + x^2*q1"), "qbar1");
  c.require(ch::jet_transport(chart, 2) == QFunction::parse("x*q0 + 3*x^2*q1 + x^3*q2"), "qbar2");

  auto pulled = ch::pull_back(chart, QFunction::parse("q2/q0 - (1/2)*q1^2/q0^2"));
  c.require(pulled == QFunction::parse("x^2*(q2/q0 - (1/2)*q1^2/q0^2) + 2*x*q1/q0 + 1/2").canonical(),
            "pull-back of the Hyvarinen score");

  auto rep = ch::verify_operator_transport(chart, QFunction::parse("-(1/2)*(q1/q0)^2"), seed);
  c.require(rep.all_passed, "operator transport identities (log chart)");
  std::mt19937_64 rng(seed + 10);
  auto fbar = suite::random_qfunction(rng, {.max_order = 2});
  auto rep2 = ch::verify_operator_transport(
      ch::ChartMap::make(QFunction::parse("x^3"), QFunction::parse("x^(1/3)")), fbar, seed);
  c.require(rep2.all_passed, "operator transport identities (cubic chart)");

  auto Pe = exponential(1.0);
  auto Qe = exponential(2.0);
  auto bad = pr::boundary_limit_diagnostic(QFunction::parse("-(1/2)*q1^2/q0"), Pe, Qe);
  c.require(bad.lower.verdict == pr::LimitVerdict::Nonzero,
            "unmodified rule should be nonzero at 0 for the exponential pair");
  auto cond = ch::transport_boundary_condition(chart, QFunction::parse("-(1/2)*q1^2/q0"));
  c.require(cond == QFunction::parse("x^2*p1 - x^2*p0*q1/q0").canonical(),
            "transported boundary condition");
  auto good = pr::boundary_limit_diagnostic_expr(cond, Pe, Qe);
  c.require(good.lower.verdict == pr::LimitVerdict::Vanishes &&
                good.upper.verdict == pr::LimitVerdict::Vanishes,
            "modified-rule condition should vanish for the exponential pair");
  return c.finish();
}

}  // namespace

Summary run(std::uint64_t seed) {
  Summary s;
  s.seed = seed;
  s.criteria.push_back(c1_generation());
  s.criteria.push_back(c2_key_equation(seed));
  s.criteria.push_back(c3_operator_identities(seed));
  s.criteria.push_back(c4_parity(seed));
  s.criteria.push_back(c5_gauge_invariance(seed));
  s.criteria.push_back(c6_standard_gauge(seed));
  s.criteria.push_back(c7_divergence(seed));
  s.criteria.push_back(c8_concavity());
  s.criteria.push_back(c9_estimation(seed));
  s.criteria.push_back(c10_charts(seed));
  s.all_passed = true;
  for (const auto& cr : s.criteria) s.all_passed = s.all_passed && cr.passed;
  return s;
}

}  // namespace localscore::selftest
