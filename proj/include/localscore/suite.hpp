#pragma once

#include <cstdint>
#include <random>

#include "localscore/expr.hpp"

namespace localscore::suite {

struct SuiteOptions {
  int max_order = 3;       // highest jet index that may appear
  int max_terms = 4;
  int max_exponent = 2;    // per-factor exponent bound
  int max_q0_inverse = 2;  // terms divided by q0^d, d <= this
  bool with_x = true;
};

// Random rational-coefficient posynomial in x and q_0..q_max, divided by a
// power of q0. Deterministic given the generator state.
QFunction random_qfunction(std::mt19937_64& rng, const SuiteOptions& opt = {});

// q0 times a posynomial in x and the ratios q_j/q0 (so exactly 1-homogeneous).
QFunction random_one_homogeneous(std::mt19937_64& rng, const SuiteOptions& opt = {});

// Posynomial in x and the ratios q_j/q0 (0-homogeneous).
QFunction random_zero_homogeneous(std::mt19937_64& rng, const SuiteOptions& opt = {});

JetPoint random_point(std::mt19937_64& rng, int max_jet, double lo = 0.1, double hi = 3.0,
                      bool with_p = false);

}  // namespace localscore::suite
