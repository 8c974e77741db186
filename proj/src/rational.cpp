#include "localscore/rational.hpp"

#include <cmath>
#include <cstdlib>

namespace localscore {

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::string to_string(const Rational& r) {
  if (is_integer(r)) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

std::optional<BigInt> integer_root(const BigInt& value, unsigned n) {
  if (value < 0) return std::nullopt;
  if (value == 0 || value == 1 || n == 1) return value;
  // Bracket by doubling, then bisect on r^n <= value.
  BigInt lo = 1, hi = 2;
  while (boost::multiprecision::pow(hi, n) < value) {
    lo = hi;
    hi *= 2;
  }
  while (lo < hi) {
    BigInt mid = (lo + hi + 1) / 2;
    if (boost::multiprecision::pow(mid, n) <= value)
      lo = mid;
    else
      hi = mid - 1;
  }
  if (boost::multiprecision::pow(lo, n) == value) return lo;
  return std::nullopt;
}

std::optional<Rational> exact_pow(const Rational& base, const Rational& e) {
  if (e == 0) return Rational(1);
  if (base == 0) return e > 0 ? std::optional<Rational>(Rational(0)) : std::nullopt;
  if (base == 1) return Rational(1);
  BigInt p = numerator(e), q = denominator(e);
  bool invert = p < 0;
  if (invert) p = -p;
  if (p > 64 || q > 64) return std::nullopt;  // keep exponent sizes sane
  unsigned pe = p.convert_to<unsigned>(), qe = q.convert_to<unsigned>();

  BigInt bn = numerator(base), bd = denominator(base);
  bool negative = bn < 0;
  if (negative) {
    if (qe % 2 == 0) return std::nullopt;  // even root of a negative number
    bn = -bn;
  }
  auto rn = integer_root(bn, qe);
  auto rd = integer_root(bd, qe);
  if (!rn || !rd) return std::nullopt;
  Rational r(boost::multiprecision::pow(*rn, pe), boost::multiprecision::pow(*rd, pe));
  if (negative && pe % 2 == 1) r = -r;
  if (invert) {
    if (r == 0) return std::nullopt;
    r = 1 / r;
  }
  return r;
}

std::optional<Rational> snap_to_rational(double v, unsigned max_den, double tol) {
  if (!std::isfinite(v)) return std::nullopt;
  for (unsigned q = 1; q <= max_den; ++q) {
    double scaled = v * q;
    double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) <= tol * q && std::abs(rounded) < 1e15) {
      return Rational(BigInt(static_cast<long long>(rounded)), BigInt(q));
    }
  }
  return std::nullopt;
}

}  // namespace localscore
