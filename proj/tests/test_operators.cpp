#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "localscore/operators.hpp"
#include "localscore/suite.hpp"

using namespace localscore;
namespace op = localscore::ops;

namespace {

QFunction Q(int j) { return QFunction::q(j); }

const QFunction kHyvGenerator = QFunction::parse("-(1/2)*q1^2/q0");
const QFunction kHyvScore = QFunction::parse("q2/q0 - (1/2)*q1^2/q0^2");

void check_zero(const QFunction& f) {
  auto z = f.is_zero();
  CHECK(z.zero);
}

}  // namespace

TEST_CASE("D: chain rule along the density") {
  CHECK(op::D(ln(Q(0))) == Q(1) / Q(0));
  CHECK(op::D(-(Q(1) / Q(0))) == -(Q(2) / Q(0)) + Q(1) * Q(1) / (Q(0) * Q(0)));
  CHECK(op::D(QFunction(5)).is_zero().exact);
  CHECK(op::D(QFunction(5)).is_zero().zero);
  // D advances opaque symbols through d/dx
  CHECK(op::D(QFunction::opaque("a") * Q(0)) ==
        QFunction::opaque("a", 1) * Q(0) + QFunction::opaque("a") * Q(1));
}

TEST_CASE("D f = 0 implies f constant (within the expression class)") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 30; ++i) {
    auto f = suite::random_qfunction(rng);
    if (op::D(f).is_zero().zero) {
      CHECK(f.order() == kOrderQFree);
      CHECK(f.partial(Var::x()).is_zero().zero);
    }
  }
}

TEST_CASE("E: Euler operator and homogeneity") {
  CHECK(op::E(Q(0)) == Q(0));
  CHECK(op::E(Q(1) / Q(0)).is_zero().zero);
  CHECK(op::E(kHyvGenerator) == kHyvGenerator);
}

TEST_CASE("Lambda: spec examples") {
  CHECK(op::Lambda(kHyvGenerator) == kHyvScore);
  CHECK(op::Lambda(QFunction(3) * Q(0)) == QFunction(3));
  std::mt19937_64 rng(32);
  for (int i = 0; i < 20; ++i) {
    auto psi = suite::random_qfunction(rng, {.max_order = 2});
    check_zero(op::Lambda(op::D(psi)));
  }
}

TEST_CASE("L: key equation operator") {
  CHECK(op::L(-ln(Q(0))) == QFunction(1));
  check_zero(op::L(kHyvScore));
  CHECK(op::L(QFunction(7)).is_zero().zero);
}

TEST_CASE("B_r: boundary operators") {
  CHECK(op::B(0, kHyvGenerator) == -(Q(1) / Q(0)));
  std::mt19937_64 rng(33);
  for (int i = 0; i < 10; ++i) {
    auto f = suite::random_qfunction(rng, {.max_order = 2});
    CHECK(op::B(3, f).is_zero().zero);              // order(f) <= r: empty sum
    CHECK(op::B(-1, f) == op::Lambda(f));           // B_{-1} = Lambda
  }
}

TEST_CASE("C: boundary entropy operator") {
  // C phi for the Hyvarinen generator: q0 * (-q1/q0) = -q1
  CHECK(op::C(kHyvGenerator) == -Q(1));
  // oracle for the same value: C D f = E f on random inputs
  std::mt19937_64 rng(34);
  for (int i = 0; i < 10; ++i) {
    auto f = suite::random_qfunction(rng, {.max_order = 2});
    CHECK(op::C(op::D(f)) == op::E(f).canonical());
  }
  CHECK(op::C(Q(0) * kHyvScore).is_zero().zero);  // standard gauge: C(q0 s) = 0
  CHECK(op::C(QFunction(4)).is_zero().zero);
}

TEST_CASE("homogeneity_degree") {
  CHECK(op::homogeneity_degree(Q(1) / Q(0)) == Rational(0));
  CHECK(op::homogeneity_degree(kHyvGenerator) == Rational(1));
  CHECK(!op::homogeneity_degree(Q(0) + Q(1) * Q(1)).has_value());
  CHECK(op::homogeneity_degree(pow(Q(0), Rational(1, 2)) * Q(1)) == Rational(3, 2));
  // through transcendental kernels: ln of a 0-homogeneous ratio
  CHECK(op::homogeneity_degree(Q(0) * ln(Q(1) / Q(0))) == Rational(1));
  CHECK(!op::homogeneity_degree(ln(Q(0))).has_value());
}

TEST_CASE("operator identity suite on random q-functions") {
  std::mt19937_64 rng(35);
  suite::SuiteOptions opt{.max_order = 3};
  for (int i = 0; i < 25; ++i) {
    auto f = suite::random_qfunction(rng, opt);

    check_zero(op::Lambda(op::D(f)));                                    // Lambda D = 0
    CHECK(op::E(op::D(f)) == op::D(op::E(f)).canonical());               // E D = D E
    CHECK(op::E(op::L(f)) == op::L(op::E(f)).canonical());               // E L = L E
    CHECK(op::Lambda(op::E(f)) ==
          (op::E(op::Lambda(f)) + op::Lambda(f)).canonical());           // Lambda E = E Lambda + Lambda
    CHECK(op::Lambda(op::E(f)) ==
          op::Lambda(Q(0) * op::Lambda(f)).canonical());                 // Lambda E = Lambda q0 Lambda
    for (int r = 0; r <= 2; ++r) {
      CHECK(op::B(r, op::D(f)) == f.partial(Var::q(r)));                 // B_r D = d/dq_r
      CHECK(op::D(op::B(r, f)).canonical() ==
            (f.partial(Var::q(r)) - op::B(r - 1, f)).canonical());       // D B_r = d/dq_r - B_{r-1}
    }
    CHECK(op::C(op::D(f)) == op::E(f).canonical());                      // C D = E
    CHECK(op::D(op::C(f)).canonical() ==
          (op::E(f) - Q(0) * op::Lambda(f)).canonical());                // D C = E - q0 Lambda
    CHECK(op::L(f) == (f - op::Lambda(Q(0) * f)).canonical());           // L = I - Lambda q0
  }
}

TEST_CASE("key equation implies 0-homogeneity; L is a projection there") {
  std::mt19937_64 rng(36);
  for (int i = 0; i < 15; ++i) {
    auto phi = suite::random_one_homogeneous(rng);
    auto s = op::Lambda(phi);
    check_zero(op::L(s));
    check_zero(op::E(s));  // Theorem: L f = 0 => f 0-homogeneous

    auto g = suite::random_zero_homogeneous(rng);
    auto lg = op::L(g);
    check_zero(op::E(lg));                      // L g stays 0-homogeneous
    CHECK(op::L(lg) == lg);                     // L^2 = L on 0-homogeneous
  }
}

TEST_CASE("degree bookkeeping: D preserves homogeneity degree") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 10; ++i) {
    auto phi = suite::random_one_homogeneous(rng);
    CHECK(op::is_homogeneous(op::D(phi), Rational(1)).zero);
    auto g = suite::random_zero_homogeneous(rng);
    CHECK(op::is_homogeneous(op::D(g), Rational(0)).zero);
  }
}

TEST_CASE("order bookkeeping: D raises order by at most 1, L at most doubles it") {
  std::mt19937_64 rng(39);
  for (int i = 0; i < 12; ++i) {
    auto f = suite::random_qfunction(rng, {.max_order = 2});
    int m = f.order();
    if (m == kOrderQFree) continue;
    CHECK(op::D(f).order() <= m + 1);
    CHECK(op::L(f).order() <= 2 * m);
    CHECK(op::Lambda(f).order() <= 2 * m);
  }
}

TEST_CASE("OperatorExpr composes right-to-left") {
  auto LD = op::OperatorExpr::lambda() * op::OperatorExpr::d();
  std::mt19937_64 rng(38);
  auto f = suite::random_qfunction(rng);
  CHECK(LD(f).is_zero().zero);
  auto Lviaexpr =
      op::OperatorExpr::identity() * op::OperatorExpr::lambda() * op::OperatorExpr::multiply_by(Q(0));
  CHECK((f.canonical() - Lviaexpr(f)).canonical() == op::L(f));
  CHECK(op::OperatorExpr::partial(Var::q(1))(kHyvGenerator) == -(Q(1) / Q(0)));
  CHECK(op::OperatorExpr::b(0)(kHyvGenerator) == -(Q(1) / Q(0)));
  CHECK((op::OperatorExpr::e() * op::OperatorExpr::c())(kHyvGenerator) == -Q(1));
}
