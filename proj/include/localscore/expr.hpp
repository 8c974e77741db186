#pragma once

#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "localscore/rational.hpp"

namespace localscore {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed expression text; position is a 0-based offset into the input.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

// Numeric evaluation failed: singularity, missing binding, complex residue.
struct EvalError : Error {
  using Error::Error;
};

// A precondition on the mathematical inputs does not hold (wrong homogeneity
// degree, key equation fails, degenerate model, ...).
struct DomainError : Error {
  using Error::Error;
};

// A variable an expression can depend on: the sample point x, a jet
// coordinate q_j, a second-family jet p_j, or a named scalar parameter.
class Var {
 public:
  enum class Kind { X, Jet, PJet, Param };

  static Var x() { return Var(Kind::X, 0, {}); }
  static Var q(int j) { return Var(Kind::Jet, j, {}); }
  static Var p(int j) { return Var(Kind::PJet, j, {}); }
  static Var param(std::string name) { return Var(Kind::Param, 0, std::move(name)); }

  Kind kind() const { return kind_; }
  int index() const { return index_; }
  const std::string& name() const { return name_; }

  friend bool operator==(const Var& a, const Var& b) {
    return a.kind_ == b.kind_ && a.index_ == b.index_ && a.name_ == b.name_;
  }
  friend bool operator<(const Var& a, const Var& b) {
    if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
    if (a.index_ != b.index_) return a.index_ < b.index_;
    return a.name_ < b.name_;
  }

  std::string str() const;

 private:
  Var(Kind k, int i, std::string n) : kind_(k), index_(i), name_(std::move(n)) {}
  Kind kind_;
  int index_;
  std::string name_;
};

// A point (x, q_0..q_M) with q_0 > 0, optionally carrying a second jet family
// p_0..p_M for boundary-divergence expressions.
struct JetPoint {
  double x = 0.0;
  std::vector<double> q;
  std::vector<double> p;
};

// Numeric meaning of an opaque function symbol: f(order, x) returns the
// order-th derivative at x.
using OpaqueFn = std::function<double(int order, double x)>;

struct Bindings {
  std::map<std::string, OpaqueFn> opaque;
  std::map<std::string, double> params;
};

// Outcome of a zero test. `exact` is false when the verdict rests on the
// sampled fallback rather than on the canonical form reaching literal 0.
struct ZeroCheck {
  bool zero = false;
  bool exact = true;
  explicit operator bool() const { return zero; }
};

// Sentinel order of a q-free expression (the paper's "order -infinity").
inline constexpr int kOrderQFree = -1;

namespace detail {
struct Node;
struct CanonCell;
using NodePtr = std::shared_ptr<const Node>;
}  // namespace detail

// An immutable symbolic expression in x, jet symbols q_j (and p_j), opaque
// univariate symbols a(x), a'(x), ..., and named parameters, closed under
// +, -, *, /, rational powers, ln and exp, with exact rational coefficients.
//
// Values are cheap to copy (shared tree). All operations are pure; instances
// are safe to share across threads.
class QFunction {
 public:
  QFunction();  // the zero expression
  QFunction(int value);
  QFunction(const Rational& value);

  static QFunction parse(std::string_view text);
  static QFunction number(const Rational& value);
  static QFunction x();
  static QFunction q(int j);
  static QFunction p(int j);
  static QFunction param(std::string name);
  static QFunction opaque(std::string name, int deriv_order = 0);

  // Sum-of-terms normal form; idempotent. Equality (==) compares canonical
  // forms structurally.
  QFunction canonical() const;

  // Canonical rendering; parse(str()) reproduces the same canonical form.
  std::string str() const;

  // Largest j with d/dq_j not identically zero, or kOrderQFree.
  int order() const;
  // Same for the p_j family.
  int pjet_order() const;

  // Canonical-form-first zero test with a documented sampled fallback for
  // expressions containing ln/exp/opaque/root atoms.
  ZeroCheck is_zero() const;

  QFunction partial(const Var& v) const;
  QFunction substitute(const std::map<Var, QFunction>& map) const;

  // IEEE double value at the point. Evaluation runs in complex arithmetic
  // internally so that expressions that are real only in combination (for
  // example p1*ln(p1/p0) - p1*ln(q1/q0) with negative slopes) still evaluate;
  // a significant imaginary residue is a domain error.
  double evaluate(const JetPoint& point, const Bindings& bindings = {}) const;

  friend QFunction operator+(const QFunction& a, const QFunction& b);
  friend QFunction operator-(const QFunction& a, const QFunction& b);
  friend QFunction operator*(const QFunction& a, const QFunction& b);
  friend QFunction operator/(const QFunction& a, const QFunction& b);
  QFunction operator-() const;

  friend bool operator==(const QFunction& a, const QFunction& b);
  friend bool operator!=(const QFunction& a, const QFunction& b) { return !(a == b); }

  // Internal: expression tree root and per-value canonical cache.
  const detail::NodePtr& root() const { return root_; }

 private:
  friend class QFunctionAccess;
  explicit QFunction(detail::NodePtr root);

  detail::NodePtr root_;
  std::shared_ptr<detail::CanonCell> cell_;
};

QFunction pow(const QFunction& base, const Rational& e);
QFunction ln(const QFunction& f);
QFunction exp(const QFunction& f);

// is_zero(a - b).
ZeroCheck equal_functions(const QFunction& a, const QFunction& b);

}  // namespace localscore
