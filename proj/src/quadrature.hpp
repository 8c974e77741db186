#pragma once

#include <functional>

namespace localscore::detail {

struct QuadResult {
  double value = 0.0;
  double abs_err = 0.0;
};

// Adaptive 15-point Gauss-Kronrod quadrature on a finite interval. The
// interval is pre-split at an irrational interior fraction so that centred
// structure (equal-mean densities, symmetric integrands) does not land a
// singular point on the first node set. Throws EvalError when the error
// estimate exceeds both abs_tol and a small relative bound.
QuadResult integrate(const std::function<double(double)>& f, double lo, double hi,
                     double abs_tol = 1e-8);

}  // namespace localscore::detail
