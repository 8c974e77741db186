#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>

namespace localscore {

// Exact rational coefficients throughout the symbolic layer, so that the
// operator identities cancel exactly. Floating point enters only at
// evaluation time.
using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

double to_double(const Rational& r);

// Renders "p" or "p/q".
std::string to_string(const Rational& r);

// Exact n-th root of a nonnegative integer, if it exists.
std::optional<BigInt> integer_root(const BigInt& value, unsigned n);

// base^e when the result is again rational (e.g. (4/9)^(1/2) = 2/3).
std::optional<Rational> exact_pow(const Rational& base, const Rational& e);

// Nearest rational with denominator <= max_den if within tol of v. Used to
// recover a homogeneity degree from a floating-point ratio.
std::optional<Rational> snap_to_rational(double v, unsigned max_den, double tol);

}  // namespace localscore
