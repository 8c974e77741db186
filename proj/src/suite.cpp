#include "localscore/suite.hpp"

namespace localscore::suite {

namespace {

// Small helpers over the raw engine to keep draws deterministic and cheap.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

Rational random_coeff(std::mt19937_64& rng) {
  long num = static_cast<long>(draw(rng, 11)) - 5;  // -5..5
  if (num == 0) num = 1;
  long den = 1 + static_cast<long>(draw(rng, 4));  // 1..4
  return Rational(num, den);
}

QFunction random_ratio_posynomial(std::mt19937_64& rng, const SuiteOptions& opt) {
  int terms = 1 + static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_terms)));
  QFunction acc = 0;
  for (int t = 0; t < terms; ++t) {
    QFunction term = QFunction::number(random_coeff(rng));
    if (opt.with_x) {
      int a = static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_exponent) + 1));
      if (a > 0) term = term * pow(QFunction::x(), Rational(a));
    }
    for (int j = 1; j <= opt.max_order; ++j) {
      if (draw(rng, 2) == 0) continue;  // keep terms sparse
      int e = 1 + static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_exponent)));
      term = term * pow(QFunction::q(j) / QFunction::q(0), Rational(e));
    }
    acc = acc + term;
  }
  return acc;
}

}  // namespace

QFunction random_qfunction(std::mt19937_64& rng, const SuiteOptions& opt) {
  int terms = 1 + static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_terms)));
  QFunction acc = 0;
  for (int t = 0; t < terms; ++t) {
    QFunction term = QFunction::number(random_coeff(rng));
    if (opt.with_x) {
      int a = static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_exponent) + 1));
      if (a > 0) term = term * pow(QFunction::x(), Rational(a));
    }
    for (int j = 0; j <= opt.max_order; ++j) {
      if (draw(rng, 2) == 0) continue;
      int e = 1 + static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_exponent)));
      term = term * pow(QFunction::q(j), Rational(e));
    }
    int d = static_cast<int>(draw(rng, static_cast<std::uint64_t>(opt.max_q0_inverse) + 1));
    if (d > 0) term = term / pow(QFunction::q(0), Rational(d));
    acc = acc + term;
  }
  return acc.canonical();
}

QFunction random_one_homogeneous(std::mt19937_64& rng, const SuiteOptions& opt) {
  return (QFunction::q(0) * random_ratio_posynomial(rng, opt)).canonical();
}

QFunction random_zero_homogeneous(std::mt19937_64& rng, const SuiteOptions& opt) {
  return random_ratio_posynomial(rng, opt).canonical();
}

JetPoint random_point(std::mt19937_64& rng, int max_jet, double lo, double hi, bool with_p) {
  std::uniform_real_distribution<double> coord(lo, hi);
  JetPoint pt;
  pt.x = coord(rng);
  pt.q.resize(static_cast<std::size_t>(std::max(max_jet, 0)) + 1);
  for (auto& v : pt.q) v = coord(rng);
  if (with_p) {
    pt.p.resize(pt.q.size());
    for (auto& v : pt.p) v = coord(rng);
  }
  return pt;
}

}  // namespace localscore::suite
