#pragma once

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "node.hpp"

namespace localscore::detail {

// Canonical form: a quotient num/den of polynomials over a field of "atoms".
// Atoms are x, q_j, p_j, named parameters, opaque derivatives a^(k)(x), and
// indivisible transcendental kernels ln(arg), exp(arg) and fractional powers
// of non-monomial polynomials (Root). Monomials carry rational exponents, so
// q0^-1 and q1^(1/2) are ordinary factors; a nontrivial den only appears for
// division by a multi-term polynomial that does not cancel.
//
// Normalization rules making the form canonical:
//   - terms combined over a common denominator, zero coefficients dropped
//   - exp(u)^r is refolded to exp(r*u); exp factors of a term are merged
//   - Root(P)^n with integer n is expanded into the polynomial P^n
//   - den has no term-wide monomial content and is monic in its leading term
//   - exact polynomial division num/den (or den/num) is applied when possible

struct Canon;
using CanonPtr = std::shared_ptr<const Canon>;

enum class AtomKind : std::uint8_t { X, Jet, PJet, Param, Opaque, Ln, Exp, Root };

struct Monomial;

struct MonoLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

using Poly = std::map<Monomial, Rational, MonoLess>;
using PolyPtr = std::shared_ptr<const Poly>;

struct Atom {
  AtomKind kind = AtomKind::X;
  int index = 0;       // Jet/PJet index, Opaque derivative order
  std::string name;    // Param/Opaque
  CanonPtr arg;        // Ln/Exp argument
  PolyPtr base;        // Root base (primitive, monic, multi-term)
};

int compare(const Atom& a, const Atom& b);

struct Monomial {
  // Sorted by atom order, exponents nonzero.
  std::vector<std::pair<Atom, Rational>> factors;
};

int compare(const Monomial& a, const Monomial& b);
int compare(const Poly& a, const Poly& b);

struct Canon {
  Poly num;
  Poly den;
};

int compare(const Canon& a, const Canon& b);
inline bool equal(const Canon& a, const Canon& b) { return compare(a, b) == 0; }

// --- constructors ---------------------------------------------------------

Poly poly_one();
Poly poly_const(const Rational& c);
Canon canon_zero();
Canon canon_one();
Canon canon_const(const Rational& c);
Canon canon_atom(Atom a);
Canon canon_var(const Var& v);

bool is_const(const Canon& c);              // num constant (or empty), den == 1
bool is_zero_canon(const Canon& c);
bool is_one_canon(const Canon& c);

// ln/exp with the trivial simplifications ln(1)=0, exp(0)=1.
Canon c_ln(const Canon& arg);
Canon c_exp(const Canon& arg);

// --- arithmetic ------------------------------------------------------------

Canon c_add(const Canon& a, const Canon& b);
Canon c_sub(const Canon& a, const Canon& b);
Canon c_neg(const Canon& a);
Canon c_mul(const Canon& a, const Canon& b);
Canon c_div(const Canon& a, const Canon& b);
Canon c_pow(const Canon& a, const Rational& e);
Canon c_scale(const Canon& a, const Rational& k);

Canon normalize(Poly num, Poly den);

// --- calculus --------------------------------------------------------------

Canon c_partial(const Canon& f, const Var& v);

using SubstMap = std::map<Var, Canon>;
Canon c_subst(const Canon& f, const SubstMap& map);

// --- structure -------------------------------------------------------------

int max_jet_index(const Canon& f);    // syntactic, -1 when absent
int max_pjet_index(const Canon& f);
bool has_inexact_atoms(const Canon& f);  // Ln/Exp/Opaque/Root present
void collect_params(const Canon& f, std::set<std::string>& out);
void collect_opaques(const Canon& f, std::set<std::string>& out);

// --- conversion, evaluation, printing ---------------------------------------

Canon canon_of_node(const Node& n);
NodePtr node_of_canon(const Canon& c);
std::string print_canon(const Canon& c);

struct EvalCtx {
  const JetPoint* point = nullptr;
  const Bindings* bindings = nullptr;
};

// Throws EvalError for singularities / missing bindings.
std::complex<double> eval_node(const Node& n, const EvalCtx& ctx);
// magnitude, when requested, accumulates sum_i |term_i| / |den| as the scale
// for the probabilistic zero tolerance.
std::complex<double> eval_canon(const Canon& c, const EvalCtx& ctx, double* magnitude = nullptr);

}  // namespace localscore::detail
