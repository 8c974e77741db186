#pragma once

#include <random>

#include "canon.hpp"

namespace localscore {

// Library-internal bridge between the public QFunction value type and the
// canonical-form layer.
class QFunctionAccess {
 public:
  static const detail::Canon& canon(const QFunction& f);
  static QFunction from_canon(detail::Canon c);
  static QFunction from_node(detail::NodePtr n);
};

namespace detail {
// Canonical-form-first zero test with the sampled fallback (see expr.hpp).
ZeroCheck zero_check_canon(const Canon& c);
NodePtr parse_text(std::string_view text);

// Random admissible evaluation context covering every symbol of c:
// coordinates in [0.1, 3], opaque symbols bound to smooth functions whose
// derivatives never vanish identically.
struct SampleCtx {
  JetPoint point;
  Bindings bindings;
};
SampleCtx random_sample_for(const Canon& c, std::mt19937_64& rng);
}  // namespace detail

}  // namespace localscore
