#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "localscore/expr.hpp"

namespace localscore::detail {

// Expression tree as written (pre-canonicalization). Subtraction and division
// are folded at construction: a-b => a + (-1)*b, a/b => a * b^-1.
struct Node {
  enum class Kind : std::uint8_t { Number, X, Jet, PJet, Param, Opaque, Add, Mul, Pow, Ln, Exp };

  Kind kind;
  Rational value;          // Number: value; Pow: exponent
  int index = 0;           // Jet/PJet index, Opaque derivative order
  std::string name;        // Param/Opaque
  std::vector<NodePtr> kids;
};

NodePtr make_number(Rational v);
NodePtr make_x();
NodePtr make_jet(int j);
NodePtr make_pjet(int j);
NodePtr make_param(std::string name);
NodePtr make_opaque(std::string name, int deriv_order);
NodePtr make_add(std::vector<NodePtr> kids);
NodePtr make_mul(std::vector<NodePtr> kids);
NodePtr make_pow(NodePtr base, Rational e);
NodePtr make_ln(NodePtr arg);
NodePtr make_exp(NodePtr arg);

}  // namespace localscore::detail
