#include "quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "localscore/expr.hpp"

namespace localscore::detail {

QuadResult integrate(const std::function<double(double)>& f, double lo, double hi,
                     double abs_tol) {
  if (!(lo < hi)) return {0.0, 0.0};
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  const double split = lo + (hi - lo) * 0.6180339887498949;
  double e1 = 0.0, e2 = 0.0;
  double v1 = GK::integrate(f, lo, split, 14, 1e-10, &e1);
  double v2 = GK::integrate(f, split, hi, 14, 1e-10, &e2);
  QuadResult r{v1 + v2, e1 + e2};
  if (!std::isfinite(r.value)) throw EvalError("quadrature produced a non-finite value");
  if (r.abs_err > abs_tol && r.abs_err > 1e-8 * std::abs(r.value))
    throw EvalError("quadrature did not converge to the requested tolerance");
  return r;
}

}  // namespace localscore::detail
