#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "localscore/expr.hpp"

namespace localscore {

// A density on an open interval, given by an unnormalized log-density l(x)
// in x and opaque/parameter symbols (no jets). Supplies the jets
// (p, p', ..., p^(M)) at a point: the ratio expressions r_j = p^(j)/p are
// built symbolically from the recursion r_{j+1} = r_j' + l' r_j, so the
// normalizing constant only enters through the cached numeric Z.
//
// Copies share the cached normalization/support; instances are safe to use
// from multiple threads.
class DensitySpec {
 public:
  DensitySpec(QFunction logdensity, double lo, double hi, Bindings bindings = {},
              int jet_order_hint = 2);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const QFunction& logdensity() const { return logdensity_; }
  const Bindings& bindings() const { return bindings_; }

  double logdensity_at(double x) const;
  double density_raw(double x) const;  // exp(l), unnormalized
  double density(double x) const;      // exp(l) / Z
  double log_norm() const;             // ln Z, validated finite

  // r_0..r_M with r_j = p^(j)(x)/p(x); extends the symbolic table on demand.
  std::vector<double> ratios(double x, int M) const;
  std::vector<double> jets(double x, int M) const;      // normalized p_j
  std::vector<double> jets_raw(double x, int M) const;  // unnormalized p_j

  // Domain truncated where the density falls below 1e-12 of its maximum.
  std::pair<double, double> support() const;

 private:
  const QFunction& ratio_expr(int j) const;

  QFunction logdensity_;
  double lo_, hi_;
  Bindings bindings_;

  struct Cache;
  std::shared_ptr<Cache> cache_;
};

}  // namespace localscore
