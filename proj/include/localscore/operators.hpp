#pragma once

#include <optional>
#include <vector>

#include "localscore/expr.hpp"

namespace localscore::ops {

// The linear differential operators on q-functions. Each is implemented
// directly from its defining sum (finite, since inputs have finite order);
// the operator identities relating them are test assertions, not alternative
// implementations, so they can serve as independent cross-checks.

// Total derivative along a fixed density: D = d/dx + sum_j q_{j+1} d/dq_j.
// A second jet family p_j, when present, is advanced the same way.
QFunction D(const QFunction& f);

// Euler operator E = sum_j q_j d/dq_j.
QFunction E(const QFunction& f);

// Lagrange (Euler-Lagrange) operator: Lambda = sum_k (-1)^k D^k d/dq_k.
QFunction Lambda(const QFunction& f);

// Key-equation operator: L = sum_k (-1)^{k+1} D^k (q0 d/dq_k).
QFunction L(const QFunction& f);

// B_r = sum_{k >= r+1} (-1)^{k-1-r} D^{k-1-r} d/dq_k, for r >= -1.
// B_{-1} coincides with Lambda.
QFunction B(int r, const QFunction& f);

// C = sum_{r >= 0} q_r B_r.
QFunction C(const QFunction& f);

// True (possibly probabilistically) iff E f = h f; the zero function passes
// for every h.
ZeroCheck is_homogeneous(const QFunction& f, const Rational& h);

// Degree h with E f = h f, or nullopt if f is not homogeneous. Rational
// degrees only; recovered symbolically when every monomial carries the same
// jet degree, otherwise from the ratio (E f)/f at a sample point followed by
// a zero test.
std::optional<Rational> homogeneity_degree(const QFunction& f);

// Lazy composition of primitive operators, applied right-to-left.
class OperatorExpr {
 public:
  static OperatorExpr identity();
  static OperatorExpr d();
  static OperatorExpr e();
  static OperatorExpr lambda();
  static OperatorExpr l();
  static OperatorExpr b(int r);
  static OperatorExpr c();
  static OperatorExpr multiply_by(QFunction g);
  static OperatorExpr partial(Var v);

  // Composition: (A * B)(f) = A(B(f)).
  OperatorExpr operator*(const OperatorExpr& rhs) const;

  QFunction apply(const QFunction& f) const;
  QFunction operator()(const QFunction& f) const { return apply(f); }

 private:
  struct Prim {
    enum class Kind { D, E, Lambda, L, B, C, Multiply, Partial, Identity } kind;
    int r = 0;
    std::optional<QFunction> g;
    std::optional<Var> v;
  };
  std::vector<Prim> prims_;  // applied right-to-left
};

}  // namespace localscore::ops
