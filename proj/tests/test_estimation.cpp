#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "localscore/estimation.hpp"
#include "localscore/rules.hpp"

using namespace localscore;
namespace est = localscore::estimation;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

est::ParametricModel normal_mean_model() {
  est::ParametricModel m;
  m.logdensity = QFunction::parse("-x^2/2 + t1*x");
  m.params = {"t1"};
  m.lo = -kInf;
  m.hi = kInf;
  return m;
}

est::ParametricModel exponential_model() {
  est::ParametricModel m;
  m.logdensity = QFunction::parse("-t1*x");  // theta e^{-theta x} up to its constant
  m.params = {"t1"};
  m.lo = 0.0;
  m.hi = kInf;
  m.param_bounds = {{{0.05, 50.0}}};
  return m;
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

}  // namespace

TEST_CASE("score_of_model: natural exponential family gives a'' + (a'+theta)^2/2") {
  est::ParametricModel m;
  m.logdensity = QFunction::opaque("a") + QFunction::param("t1") * QFunction::x();
  m.params = {"t1"};
  m.lo = -kInf;
  m.hi = kInf;
  auto S = est::score_of_model(rules::hyvarinen(), m);
  auto aprime = QFunction::opaque("a", 1);
  auto target = (QFunction::opaque("a", 2) +
                 QFunction(Rational(1, 2)) * pow(aprime + QFunction::param("t1"), Rational(2)))
                    .canonical();
  CHECK(S == target);
}

TEST_CASE("score_of_model: additive theta-only terms drop out exactly") {
  auto m1 = normal_mean_model();
  auto m2 = m1;
  m2.logdensity = m1.logdensity + QFunction::param("t1") * QFunction::param("t1") + QFunction(3);
  auto s1 = est::score_of_model(rules::hyvarinen(), m1);
  auto s2 = est::score_of_model(rules::hyvarinen(), m2);
  CHECK(s1 == s2);  // the normalizing constant never enters
}

TEST_CASE("score_of_model: modified rule on the exponential model") {
  auto S = est::score_of_model(rules::modified_hyvarinen(), exponential_model());
  auto t = QFunction::param("t1");
  auto x = QFunction::x();
  auto target = (QFunction(Rational(1, 2)) * x * x * t * t - QFunction(2) * x * t +
                 QFunction(Rational(1, 2)))
                    .canonical();
  CHECK(S == target);
}

TEST_CASE("score_of_model depends only on derivatives of the log-density") {
  est::ParametricModel m;
  m.logdensity = QFunction::opaque("a") + QFunction::param("t1") * QFunction::x();
  m.params = {"t1"};
  m.lo = -kInf;
  m.hi = kInf;
  auto S = est::score_of_model(rules::hyvarinen(), m);
  // two bindings whose opaque symbols differ only in the 0th derivative
  Bindings b1, b2;
  b1.params["t1"] = 0.4;
  b2.params["t1"] = 0.4;
  b1.opaque["a"] = [](int k, double xx) { return k == 0 ? std::sin(xx) : (k == 1 ? std::cos(xx) : -std::sin(xx)); };
  b2.opaque["a"] = [](int k, double xx) { return k == 0 ? 77.0 + std::sin(xx) : (k == 1 ? std::cos(xx) : -std::sin(xx)); };
  JetPoint pt;
  pt.x = 0.8;
  CHECK(S.evaluate(pt, b1) == S.evaluate(pt, b2));
  CHECK_THROWS_AS(est::score_of_model(rules::ScoringRule{rules::log_score(), {}, rules::GaugeTag::User, {}, {}},
                                      m),
                  DomainError);  // log score is not 0-homogeneous
}

TEST_CASE("estimate: Hyvarinen on the normal-mean model gives the sample mean") {
  std::vector<double> data{1.3, -0.2, 0.45, 2.2, -1.7, 0.9, 0.31};
  auto res = est::estimate(rules::hyvarinen(), normal_mean_model(), data);
  REQUIRE(res.theta.size() == 1);
  CHECK(res.method == est::Method::Newton);
  CHECK_FALSE(res.degenerate);
  CHECK(res.theta[0] == doctest::Approx(mean_of(data)).epsilon(1e-10));
  CHECK(res.score_gradient_norm < 1e-8);
}

TEST_CASE("estimate: modified rule on the exponential model gives 2*sum(x)/sum(x^2)") {
  std::vector<double> data{0.3, 1.7, 0.05, 0.66, 2.4, 0.11, 0.89};
  double sx = 0, sxx = 0;
  for (double x : data) {
    sx += x;
    sxx += x * x;
  }
  auto res = est::estimate(rules::modified_hyvarinen(), exponential_model(), data);
  CHECK(res.theta[0] == doctest::Approx(2 * sx / sxx).epsilon(1e-10));
}

TEST_CASE("estimate: consistency at desk scale for the exponential model") {
  auto model = exponential_model();
  auto xs = est::sample_model(model, {2.0}, 100000, 42);
  // sampler sanity against the exact moments E X = 1/2, E X^2 = 1/2
  CHECK(mean_of(xs) == doctest::Approx(0.5).epsilon(0.02));
  auto res = est::estimate(rules::modified_hyvarinen(), model, xs, 42);
  CHECK(std::abs(res.theta[0] - 2.0) / 2.0 < 0.02);
}

TEST_CASE("estimate: unmodified Hyvarinen on the exponential model is degenerate") {
  std::vector<double> data{0.4, 1.1, 0.2};
  auto res = est::estimate(rules::hyvarinen(), exponential_model(), data);
  CHECK(res.degenerate);
  CHECK(res.method == est::Method::Degenerate);
  CHECK(res.theta.empty());
  CHECK(!res.diagnostic.empty());
}

TEST_CASE("estimate: input validation") {
  CHECK_THROWS_AS(est::estimate(rules::hyvarinen(), normal_mean_model(), {}), DomainError);
  CHECK_THROWS_AS(est::estimate(rules::modified_hyvarinen(), exponential_model(), {-1.0}),
                  DomainError);
}

TEST_CASE("selection model estimator") {
  std::vector<double> data{0.2, 1.4, -0.6, 0.0, 2.2};
  // kappa == 0: reduces to the sample mean
  CHECK(est::selection_model_estimator([](double) { return 0.0; }, data) ==
        doctest::Approx(mean_of(data)));
  // kappa(x) = -x (selection k(x) = e^{-x}): mean + 1
  CHECK(est::selection_model_estimator([](double) { return -1.0; }, data) ==
        doctest::Approx(mean_of(data) + 1.0));
}

TEST_CASE("selection model: closed form agrees with the generic optimizer") {
  est::ParametricModel m;
  m.logdensity = QFunction::parse("-x - (x - t1)^2/2");  // kappa(x) = -x
  m.params = {"t1"};
  m.lo = -kInf;
  m.hi = kInf;
  std::vector<double> data{0.2, 1.4, -0.6, 0.0, 2.2, -0.9};
  double closed = est::selection_model_estimator([](double) { return -1.0; }, data);
  auto res = est::estimate(rules::hyvarinen(), m, data);
  CHECK(res.theta[0] == doctest::Approx(closed).epsilon(1e-8));
}

TEST_CASE("selection model: simulated unbiasedness at theta = 1") {
  // k(x) = e^{-x} makes Q_[theta=1] exactly N(0,1)
  est::ParametricModel m;
  m.logdensity = QFunction::parse("-x - (x - t1)^2/2");
  m.params = {"t1"};
  m.lo = -kInf;
  m.hi = kInf;
  auto xs = est::sample_model(m, {1.0}, 10000, 7);
  double theta_hat = est::selection_model_estimator([](double) { return -1.0; }, xs);
  double sd = 0.0, mu = mean_of(xs);
  for (double x : xs) sd += (x - mu) * (x - mu);
  sd = std::sqrt(sd / xs.size());
  double stderr_est = sd / std::sqrt(static_cast<double>(xs.size()));
  CHECK(std::abs(theta_hat - 1.0) < 3 * stderr_est + 1e-3);
}

TEST_CASE("unbiasedness_check: Hyvarinen estimating equation is unbiased") {
  auto rep = est::unbiasedness_check(rules::hyvarinen(), normal_mean_model(), {0.0}, 20000, 11);
  CHECK_FALSE(rep.degenerate);
  CHECK(rep.max_ratio < 3.0);

  // analytic cross-check: sigma = t1 - x has mean 0 under N(theta0, 1)
  auto S = est::score_of_model(rules::hyvarinen(), normal_mean_model());
  CHECK(S.partial(Var::param("t1")) ==
        (QFunction::param("t1") - QFunction::x()).canonical());
}

TEST_CASE("unbiasedness_check: degenerate case is flagged with a nonzero mean") {
  auto rep = est::unbiasedness_check(rules::hyvarinen(), exponential_model(), {2.0}, 500, 3);
  CHECK(rep.degenerate);
  CHECK(rep.mean[0] == doctest::Approx(2.0));  // sigma == theta, constant
  CHECK(rep.stderr_of_mean[0] == doctest::Approx(0.0));
}

TEST_CASE("read_data_file") {
  std::string path = "test_data_tmp.csv";
  {
    std::ofstream out(path);
    out << "0.5\n"
        << "  1.25 \n"
        << "\n"
        << "-3\n";
  }
  auto xs = est::read_data_file(path);
  CHECK(xs == std::vector<double>{0.5, 1.25, -3.0});

  {
    std::ofstream out(path);
    out << "a,0.5,b\n1.0,2.5,9\n";
  }
  auto col = est::read_data_file(path, 1);
  CHECK(col == std::vector<double>{0.5, 2.5});
  CHECK_THROWS_AS(est::read_data_file(path, 0), Error);  // "a" is not a number

  {
    std::ofstream out(path);
    out << "inf\n";
  }
  CHECK_THROWS_AS(est::read_data_file(path), Error);
  CHECK_THROWS_AS(est::read_data_file("does_not_exist.csv"), Error);
  std::remove(path.c_str());
}
