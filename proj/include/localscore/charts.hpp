#pragma once

#include <cstdint>
#include <vector>

#include "localscore/expr.hpp"

namespace localscore::charts {

// An invertible smooth reparametrization xbar = gamma(x) of the sample
// space, with alpha = 1/gamma' and the triangular jet-transport coefficient
// table a_{kr}(x) from the recursion a_{k+1,r} = alpha (a'_{kr} + a_{k,r-1}),
// a_00 = alpha. Inverse coefficients are obtained by symbolically inverting
// the triangular table and reexpressing in xbar via delta = gamma^{-1}.
class ChartMap {
 public:
  // Both gamma and its inverse delta are expressions in x (delta is read as
  // a function of xbar). Monotonicity is checked by sampling gamma' > 0, and
  // gamma(delta(x)) = x by the probabilistic zero test.
  static ChartMap make(const QFunction& gamma, const QFunction& delta, int max_order = 4,
                       double check_lo = 0.1, double check_hi = 3.0);

  const QFunction& gamma() const { return gamma_; }
  const QFunction& delta() const { return delta_; }
  const QFunction& alpha() const { return alpha_; }
  int max_order() const { return max_order_; }

  // a_{kr}(x), zero outside 0 <= r <= k <= max_order.
  const QFunction& coeff(int k, int r) const;
  // abar_{kr}(xbar) with q_k = sum_r abar_{kr} qbar_r.
  const QFunction& inverse_coeff(int k, int r) const;

 private:
  ChartMap() = default;
  QFunction gamma_, delta_, alpha_;
  int max_order_ = 0;
  std::vector<std::vector<QFunction>> a_;
  std::vector<std::vector<QFunction>> abar_;
  QFunction zero_;
};

// qbar_k as an expression in (x, q_0..q_k): sum_r a_{kr}(x) q_r.
QFunction jet_transport(const ChartMap& chart, int k);

// Rewrites a barred-representation q-function into the base representation:
// substitutes x -> gamma(x), q_k -> jet_transport(k) (and p_k likewise).
// Preserves homogeneity degree and concavity.
QFunction pull_back(const ChartMap& chart, const QFunction& f_bar);

// The inverse rewriting, using the inverse coefficient table.
QFunction push_forward(const ChartMap& chart, const QFunction& f);

// Base-representation generator of the rule that phi_bar generates in the
// barred representation: q0 * pull_back(phi_bar / qbar0). (Pulling back a
// generator directly would change the rule: Lambda does not transport, the
// 0-homogeneous deriving function does.)
QFunction transport_generator(const ChartMap& chart, const QFunction& phi_bar);

// The barred-representation boundary divergence of phi_bar, reexpressed in
// the base representation (feeds the end-point diagnostics).
QFunction transport_boundary_condition(const ChartMap& chart, const QFunction& phi_bar);

struct TransportReport {
  ZeroCheck d_transport;        // pull_back(Dbar fbar) = alpha * D(pull_back fbar)
  ZeroCheck l_transport;        // pull_back(Lbar fbar) = L(pull_back fbar)
  ZeroCheck ratio_d_transport;  // qbar0^{-1} Dbar = q0^{-1} D
  bool boundary_transport = false;  // sum_r p_r B_r = sum_k pbar_k Bbar_k alpha
  double boundary_max_gap = 0.0;
  bool all_passed = false;
};

TransportReport verify_operator_transport(const ChartMap& chart, const QFunction& f_bar,
                                          std::uint64_t seed = 0);

}  // namespace localscore::charts
