#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "localscore/charts.hpp"
#include "localscore/estimation.hpp"
#include "localscore/operators.hpp"
#include "localscore/rules.hpp"
#include "localscore/suite.hpp"

using namespace localscore;
namespace ch = localscore::charts;

namespace {

ch::ChartMap log_chart() {
  return ch::ChartMap::make(QFunction::parse("ln(x)"), QFunction::parse("exp(x)"));
}

const QFunction kHyvScore = QFunction::parse("q2/q0 - (1/2)*q1^2/q0^2");

}  // namespace

TEST_CASE("log chart: jet transport matches the worked example") {
  auto chart = log_chart();
  CHECK(chart.alpha() == QFunction::x());
  CHECK(ch::jet_transport(chart, 0) == QFunction::parse("x*q0"));
  CHECK(ch::jet_transport(chart, 1) == QFunction::parse("x*q0 + x^2*q1"));
  CHECK(ch::jet_transport(chart, 2) == QFunction::parse("x*q0 + 3*x^2*q1 + x^3*q2"));
}

TEST_CASE("identity and scaling charts") {
  auto ident = ch::ChartMap::make(QFunction::x(), QFunction::x());
  for (int k = 0; k <= 3; ++k) CHECK(ch::jet_transport(ident, k) == QFunction::q(k));
  auto f = QFunction::parse("q2/q0 + x*q1");
  CHECK(ch::pull_back(ident, f) == f.canonical());

  auto twice = ch::ChartMap::make(QFunction::parse("2*x"), QFunction::parse("x/2"));
  for (int k = 0; k <= 3; ++k) {
    auto target = (QFunction::number(exact_pow(Rational(2), Rational(-(k + 1))).value()) *
                   QFunction::q(k))
                      .canonical();
    CHECK(ch::jet_transport(twice, k) == target);
  }
}

TEST_CASE("chart validation") {
  CHECK_THROWS_AS(ch::ChartMap::make(QFunction::parse("-x"), QFunction::parse("-x")),
                  DomainError);  // decreasing
  CHECK_THROWS_AS(ch::ChartMap::make(QFunction::parse("ln(x)"), QFunction::parse("x")),
                  DomainError);  // delta does not invert gamma
  CHECK_THROWS_AS(ch::ChartMap::make(QFunction::parse("q0*x"), QFunction::x()), DomainError);
  CHECK_THROWS_AS(ch::ChartMap::make(QFunction::parse("a(x)"), QFunction::x()), DomainError);
}

TEST_CASE("pull back: the modified Hyvarinen construction") {
  auto chart = log_chart();
  auto gbar = QFunction::parse("-(1/2)*(q1/q0)^2");
  CHECK(ch::pull_back(chart, gbar) == QFunction::parse("-(1/2)*(1 + x*q1/q0)^2").canonical());

  auto pulled_score = ch::pull_back(chart, kHyvScore);
  auto eq38 = QFunction::parse(
      "x^2*(q2/q0 - (1/2)*q1^2/q0^2) + 2*x*q1/q0 + 1/2");
  CHECK(pulled_score == eq38.canonical());

  // the pulled-back deriving function generates the pulled-back rule
  auto rule = rules::derive_from(ch::pull_back(chart, gbar));
  CHECK(rule.s == eq38.canonical());
}

TEST_CASE("pull back preserves homogeneity degree") {
  auto chart = log_chart();
  std::mt19937_64 rng(61);
  for (int i = 0; i < 8; ++i) {
    auto g = suite::random_zero_homogeneous(rng, {.max_order = 2});
    CHECK(ops::is_homogeneous(ch::pull_back(chart, g), Rational(0)).zero);
    auto phi = suite::random_one_homogeneous(rng, {.max_order = 2});
    CHECK(ops::is_homogeneous(ch::pull_back(chart, phi), Rational(1)).zero);
  }
}

TEST_CASE("push forward inverts pull back") {
  auto chart = log_chart();
  std::mt19937_64 rng(62);
  for (int i = 0; i < 6; ++i) {
    auto fbar = suite::random_qfunction(rng, {.max_order = 2});
    auto back = ch::push_forward(chart, ch::pull_back(chart, fbar));
    CHECK(equal_functions(back, fbar).zero);
  }
}

TEST_CASE("operator transport: Dbar = alpha D, Lbar = L, boundary contraction") {
  auto chart = log_chart();
  auto gbar = QFunction::parse("-(1/2)*(q1/q0)^2");
  auto rep = ch::verify_operator_transport(chart, gbar, 5);
  CHECK(rep.d_transport.zero);
  CHECK(rep.l_transport.zero);
  CHECK(rep.ratio_d_transport.zero);
  CHECK(rep.boundary_transport);
  CHECK(rep.all_passed);

  auto ident = ch::ChartMap::make(QFunction::x(), QFunction::x());
  auto any = QFunction::parse("q1^2/q0 + x*q0");
  CHECK(ch::verify_operator_transport(ident, any, 5).all_passed);

  // a nonlinear strictly increasing chart with an exact inverse
  auto cubic = ch::ChartMap::make(QFunction::parse("x^3"), QFunction::parse("x^(1/3)"));
  std::mt19937_64 rng(63);
  auto fbar = suite::random_qfunction(rng, {.max_order = 2});
  CHECK(ch::verify_operator_transport(cubic, fbar, 5).all_passed);
}

TEST_CASE("invariance of derived scores across representations") {
  // S(x, Q) = (I - L) g with g the pull-back of gbar reproduces the
  // pull-back of Sbar = (I - Lbar) gbar
  auto chart = log_chart();
  auto gbar = QFunction::parse("-(1/2)*(q1/q0)^2");
  auto sbar = rules::derive_from(gbar).s;
  auto s = rules::derive_from(ch::pull_back(chart, gbar)).s;
  CHECK(s == ch::pull_back(chart, sbar));
}

TEST_CASE("transport_generator carries the rule, not just the expression") {
  auto chart = log_chart();
  std::mt19937_64 rng(64);
  for (int i = 0; i < 5; ++i) {
    auto phibar = suite::random_one_homogeneous(rng, {.max_order = 1});
    auto sbar = rules::generate(phibar).s;
    auto phi = ch::transport_generator(chart, phibar);
    CHECK(rules::generate(phi).s == ch::pull_back(chart, sbar));
  }
  // the worked example: the barred Hyvarinen generator lands on the modified
  // rule's generator q0 * g with g = -(1/2)(1 + x q1/q0)^2
  auto phi = ch::transport_generator(chart, QFunction::parse("-(1/2)*q1^2/q0"));
  CHECK(phi == (QFunction::q(0) * QFunction::parse("-(1/2)*(1 + x*q1/q0)^2")).canonical());
  CHECK(rules::generate(phi).s == rules::modified_hyvarinen().s);
}

TEST_CASE("coefficient table is triangular and zero-padded outside") {
  auto chart = log_chart();
  for (int k = 0; k <= chart.max_order(); ++k) {
    for (int r = k + 1; r <= chart.max_order() + 2; ++r) {
      CHECK(chart.coeff(k, r).is_zero().zero);
      CHECK(chart.inverse_coeff(k, r).is_zero().zero);
    }
  }
  CHECK(chart.coeff(-1, 0).is_zero().zero);
  // inverse really inverts: sum_j a_{kj}(x) abar_{jr}(gamma(x)) = [k == r]
  auto to_x = std::map<Var, QFunction>{{Var::x(), chart.gamma()}};
  for (int k = 0; k <= 2; ++k) {
    for (int r = 0; r <= k; ++r) {
      QFunction acc = 0;
      for (int j = r; j <= k; ++j)
        acc = acc + chart.coeff(k, j) * chart.inverse_coeff(j, r).substitute(to_x);
      CHECK(equal_functions(acc, QFunction(k == r ? 1 : 0)).zero);
    }
  }
}

TEST_CASE("estimating through the chart equals the modified rule directly") {
  auto chart = log_chart();
  auto transported = rules::generate(
      ch::transport_generator(chart, QFunction::parse("-(1/2)*q1^2/q0")));
  auto direct = rules::modified_hyvarinen();

  estimation::ParametricModel m;
  m.logdensity = QFunction::parse("-t1*x");
  m.params = {"t1"};
  m.lo = 0.0;
  m.hi = std::numeric_limits<double>::infinity();
  std::vector<double> data{0.31, 1.72, 0.44, 0.95, 2.81, 0.12};
  auto a = estimation::estimate(transported, m, data);
  auto b = estimation::estimate(direct, m, data);
  CHECK(a.theta[0] == doctest::Approx(b.theta[0]).epsilon(1e-10));
}

TEST_CASE("transported boundary condition") {
  auto chart = log_chart();
  auto phibar = QFunction::parse("-(1/2)*q1^2/q0");
  auto cond = ch::transport_boundary_condition(chart, phibar);
  CHECK(cond == QFunction::parse("x^2*p1 - x^2*p0*q1/q0").canonical());

  auto ident = ch::ChartMap::make(QFunction::x(), QFunction::x());
  CHECK(ch::transport_boundary_condition(ident, phibar) ==
        QFunction::parse("p1 - p0*q1/q0").canonical());

  // constant-slope chart: same condition up to a constant factor
  auto twice = ch::ChartMap::make(QFunction::parse("2*x"), QFunction::parse("x/2"));
  CHECK(ch::transport_boundary_condition(twice, phibar) ==
        (QFunction::number(Rational(1, 4)) * QFunction::parse("p1 - p0*q1/q0")).canonical());
}
