#include "canon.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace localscore::detail {

// ---------------------------------------------------------------------------
// Node constructors
// ---------------------------------------------------------------------------

static NodePtr node(Node n) { return std::make_shared<Node>(std::move(n)); }

NodePtr make_number(Rational v) { return node({Node::Kind::Number, std::move(v), 0, {}, {}}); }
NodePtr make_x() { return node({Node::Kind::X, {}, 0, {}, {}}); }
NodePtr make_jet(int j) { return node({Node::Kind::Jet, {}, j, {}, {}}); }
NodePtr make_pjet(int j) { return node({Node::Kind::PJet, {}, j, {}, {}}); }
NodePtr make_param(std::string name) { return node({Node::Kind::Param, {}, 0, std::move(name), {}}); }
NodePtr make_opaque(std::string name, int d) {
  return node({Node::Kind::Opaque, {}, d, std::move(name), {}});
}
NodePtr make_add(std::vector<NodePtr> kids) {
  if (kids.empty()) return make_number(0);
  if (kids.size() == 1) return kids[0];
  return node({Node::Kind::Add, {}, 0, {}, std::move(kids)});
}
NodePtr make_mul(std::vector<NodePtr> kids) {
  if (kids.empty()) return make_number(1);
  if (kids.size() == 1) return kids[0];
  return node({Node::Kind::Mul, {}, 0, {}, std::move(kids)});
}
NodePtr make_pow(NodePtr base, Rational e) {
  return node({Node::Kind::Pow, std::move(e), 0, {}, {std::move(base)}});
}
NodePtr make_ln(NodePtr arg) { return node({Node::Kind::Ln, {}, 0, {}, {std::move(arg)}}); }
NodePtr make_exp(NodePtr arg) { return node({Node::Kind::Exp, {}, 0, {}, {std::move(arg)}}); }

// ---------------------------------------------------------------------------
// Total orders
// ---------------------------------------------------------------------------

static int cmp(const Rational& a, const Rational& b) { return a < b ? -1 : (b < a ? 1 : 0); }
static int cmp(int a, int b) { return a < b ? -1 : (a > b ? 1 : 0); }
static int cmp(const std::string& a, const std::string& b) {
  int c = a.compare(b);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

int compare(const Atom& a, const Atom& b) {
  if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
  switch (a.kind) {
    case AtomKind::X:
      return 0;
    case AtomKind::Jet:
    case AtomKind::PJet:
      return cmp(a.index, b.index);
    case AtomKind::Param:
      return cmp(a.name, b.name);
    case AtomKind::Opaque: {
      int c = cmp(a.name, b.name);
      return c != 0 ? c : cmp(a.index, b.index);
    }
    case AtomKind::Ln:
    case AtomKind::Exp:
      return compare(*a.arg, *b.arg);
    case AtomKind::Root:
      return compare(*a.base, *b.base);
  }
  return 0;
}

// Merged-lex order: walk the union of atoms in ascending atom order; the
// first atom whose exponents differ decides, larger exponent wins. This
// order is translation invariant (compatible with monomial multiplication),
// which the exact-division routine relies on.
int compare(const Monomial& a, const Monomial& b) {
  std::size_t i = 0, j = 0;
  while (i < a.factors.size() || j < b.factors.size()) {
    if (i < a.factors.size() && j < b.factors.size()) {
      int c = compare(a.factors[i].first, b.factors[j].first);
      if (c < 0) return a.factors[i].second > 0 ? 1 : -1;
      if (c > 0) return b.factors[j].second > 0 ? -1 : 1;
      int e = cmp(a.factors[i].second, b.factors[j].second);
      if (e != 0) return e;
      ++i;
      ++j;
    } else if (i < a.factors.size()) {
      return a.factors[i].second > 0 ? 1 : -1;
    } else {
      return b.factors[j].second > 0 ? -1 : 1;
    }
  }
  return 0;
}

bool MonoLess::operator()(const Monomial& a, const Monomial& b) const { return compare(a, b) < 0; }

int compare(const Poly& a, const Poly& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end() && ib != b.end(); ++ia, ++ib) {
    int c = compare(ia->first, ib->first);
    if (c != 0) return c;
    c = cmp(ia->second, ib->second);
    if (c != 0) return c;
  }
  if (ia != a.end()) return 1;
  if (ib != b.end()) return -1;
  return 0;
}

int compare(const Canon& a, const Canon& b) {
  int c = compare(a.num, b.num);
  return c != 0 ? c : compare(a.den, b.den);
}

// ---------------------------------------------------------------------------
// Basic constructors and predicates
// ---------------------------------------------------------------------------

static void poly_insert(Poly& p, const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto [it, fresh] = p.try_emplace(m, c);
  if (!fresh) {
    it->second += c;
    if (it->second == 0) p.erase(it);
  }
}

Poly poly_one() { return poly_const(Rational(1)); }

Poly poly_const(const Rational& c) {
  Poly p;
  poly_insert(p, Monomial{}, c);
  return p;
}

static bool is_one_poly(const Poly& p) {
  return p.size() == 1 && p.begin()->first.factors.empty() && p.begin()->second == 1;
}

Canon canon_zero() { return Canon{{}, poly_one()}; }
Canon canon_one() { return canon_const(Rational(1)); }
Canon canon_const(const Rational& c) { return Canon{poly_const(c), poly_one()}; }

Canon canon_atom(Atom a) {
  Monomial m;
  m.factors.emplace_back(std::move(a), Rational(1));
  Poly p;
  p.emplace(std::move(m), Rational(1));
  return Canon{std::move(p), poly_one()};
}

Canon canon_var(const Var& v) {
  Atom a;
  switch (v.kind()) {
    case Var::Kind::X: a.kind = AtomKind::X; break;
    case Var::Kind::Jet: a.kind = AtomKind::Jet; a.index = v.index(); break;
    case Var::Kind::PJet: a.kind = AtomKind::PJet; a.index = v.index(); break;
    case Var::Kind::Param: a.kind = AtomKind::Param; a.name = v.name(); break;
  }
  return canon_atom(std::move(a));
}

bool is_zero_canon(const Canon& c) { return c.num.empty(); }
bool is_one_canon(const Canon& c) { return is_one_poly(c.num) && is_one_poly(c.den); }
bool is_const(const Canon& c) {
  if (!is_one_poly(c.den)) return false;
  return c.num.empty() || (c.num.size() == 1 && c.num.begin()->first.factors.empty());
}

Canon c_ln(const Canon& arg) {
  if (is_zero_canon(arg)) throw Error("ln of identically zero expression");
  if (is_one_canon(arg)) return canon_zero();
  Atom a;
  a.kind = AtomKind::Ln;
  a.arg = std::make_shared<Canon>(arg);
  return canon_atom(std::move(a));
}

Canon c_exp(const Canon& arg) {
  if (is_zero_canon(arg)) return canon_one();
  Atom a;
  a.kind = AtomKind::Exp;
  a.arg = std::make_shared<Canon>(arg);
  return canon_atom(std::move(a));
}

// ---------------------------------------------------------------------------
// Term normalization
// ---------------------------------------------------------------------------

// A term in flight: coefficient and unsorted/unmerged factor list.
struct RawTerm {
  Rational coeff;
  std::vector<std::pair<Atom, Rational>> factors;
};

static bool rational_to_long(const Rational& r, long& out) {
  if (!is_integer(r)) return false;
  BigInt n = numerator(r);
  if (n > 1000000 || n < -1000000) return false;
  out = n.convert_to<long>();
  return true;
}

// Normalizes a term: sorts and merges factors, refolds exp powers
// (exp(u)^r -> exp(r*u), one exp factor per term) and expands integer powers
// of Root atoms back into polynomials. The result is usually a single
// monomial but may be a general Canon when an expansion fires.
static Canon term_to_canon(RawTerm t) {
  if (t.coeff == 0) return canon_zero();
  std::sort(t.factors.begin(), t.factors.end(),
            [](const auto& a, const auto& b) { return compare(a.first, b.first) < 0; });
  // merge equal atoms
  std::vector<std::pair<Atom, Rational>> merged;
  for (auto& f : t.factors) {
    if (f.second == 0) continue;
    if (!merged.empty() && compare(merged.back().first, f.first) == 0) {
      merged.back().second += f.second;
      if (merged.back().second == 0) merged.pop_back();
    } else {
      merged.push_back(std::move(f));
    }
  }

  Canon exp_arg = canon_zero();
  bool have_exp = false;
  std::vector<std::pair<PolyPtr, long>> expansions;
  Monomial m;
  for (auto& [atom, e] : merged) {
    if (atom.kind == AtomKind::Exp) {
      have_exp = true;
      exp_arg = c_add(exp_arg, e == 1 ? *atom.arg : c_scale(*atom.arg, e));
      continue;
    }
    if (atom.kind == AtomKind::Root) {
      long n;
      if (rational_to_long(e, n)) {
        if (n != 0) expansions.emplace_back(atom.base, n);
        continue;
      }
    }
    m.factors.emplace_back(std::move(atom), std::move(e));
  }
  if (have_exp && !is_zero_canon(exp_arg)) {
    Atom a;
    a.kind = AtomKind::Exp;
    a.arg = std::make_shared<Canon>(std::move(exp_arg));
    // keep sorted: Exp ranks after most kinds, but re-sort to be safe
    m.factors.emplace_back(std::move(a), Rational(1));
    std::sort(m.factors.begin(), m.factors.end(),
              [](const auto& a2, const auto& b2) { return compare(a2.first, b2.first) < 0; });
  }

  Poly p;
  p.emplace(std::move(m), std::move(t.coeff));
  Canon res{std::move(p), poly_one()};
  for (auto& [base, n] : expansions) {
    res = c_mul(res, c_pow(Canon{*base, poly_one()}, Rational(n)));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Polynomial helpers
// ---------------------------------------------------------------------------

static Monomial mono_mul(const Monomial& a, const Monomial& b) {
  Monomial out;
  std::size_t i = 0, j = 0;
  while (i < a.factors.size() || j < b.factors.size()) {
    if (j == b.factors.size() ||
        (i < a.factors.size() && compare(a.factors[i].first, b.factors[j].first) < 0)) {
      out.factors.push_back(a.factors[i++]);
    } else if (i == a.factors.size() || compare(b.factors[j].first, a.factors[i].first) < 0) {
      out.factors.push_back(b.factors[j++]);
    } else {
      Rational e = a.factors[i].second + b.factors[j].second;
      if (e != 0) out.factors.emplace_back(a.factors[i].first, std::move(e));
      ++i;
      ++j;
    }
  }
  return out;
}

static bool mono_has_special(const Monomial& m) {
  for (auto& [a, e] : m.factors) {
    if (a.kind == AtomKind::Exp || a.kind == AtomKind::Root) return true;
    (void)e;
  }
  return false;
}

static bool poly_has_special(const Poly& p) {
  for (auto& [m, c] : p) {
    if (mono_has_special(m)) return true;
    (void)c;
  }
  return false;
}

// Product of two polynomials; returns a Canon because Root expansions can
// reintroduce denominators.
static Canon poly_mul(const Poly& A, const Poly& B) {
  if (A.empty() || B.empty()) return canon_zero();
  if (is_one_poly(A)) return Canon{B, poly_one()};
  if (is_one_poly(B)) return Canon{A, poly_one()};
  bool special = poly_has_special(A) || poly_has_special(B);
  Poly main;
  Canon overflow = canon_zero();
  bool have_overflow = false;
  for (const auto& [ma, ca] : A) {
    for (const auto& [mb, cb] : B) {
      if (!special) {
        poly_insert(main, mono_mul(ma, mb), ca * cb);
      } else {
        RawTerm t;
        t.coeff = ca * cb;
        t.factors.reserve(ma.factors.size() + mb.factors.size());
        t.factors.insert(t.factors.end(), ma.factors.begin(), ma.factors.end());
        t.factors.insert(t.factors.end(), mb.factors.begin(), mb.factors.end());
        Canon r = term_to_canon(std::move(t));
        if (is_one_poly(r.den) && r.num.size() <= 1) {
          for (auto& [m, c] : r.num) poly_insert(main, m, c);
        } else {
          overflow = c_add(overflow, r);
          have_overflow = true;
        }
      }
    }
  }
  Canon res{std::move(main), poly_one()};
  if (have_overflow) res = c_add(res, overflow);
  return res;
}

// Per-atom minimum exponent over all terms (absent counts as 0).
static Monomial poly_content(const Poly& p) {
  std::vector<std::pair<Atom, Rational>> mins;  // sorted by atom
  std::vector<int> counts;
  for (const auto& [m, c] : p) {
    (void)c;
    for (const auto& [a, e] : m.factors) {
      auto it = std::lower_bound(mins.begin(), mins.end(), a, [](const auto& x, const Atom& y) {
        return compare(x.first, y) < 0;
      });
      if (it != mins.end() && compare(it->first, a) == 0) {
        std::size_t idx = it - mins.begin();
        if (e < it->second) it->second = e;
        counts[idx] += 1;
      } else {
        std::size_t idx = it - mins.begin();
        mins.insert(it, {a, e});
        counts.insert(counts.begin() + idx, 1);
      }
    }
  }
  Monomial out;
  int n = static_cast<int>(p.size());
  for (std::size_t i = 0; i < mins.size(); ++i) {
    Rational e = mins[i].second;
    if (counts[i] < n && e > 0) e = 0;  // missing somewhere: min is 0
    if (e != 0) out.factors.emplace_back(mins[i].first, e);
  }
  return out;
}

static Monomial mono_inverse(const Monomial& m) {
  Monomial out = m;
  for (auto& [a, e] : out.factors) {
    (void)a;
    e = -e;
  }
  return out;
}

static Poly poly_div_mono(const Poly& p, const Monomial& m) {
  Monomial inv = mono_inverse(m);
  Poly out;
  for (const auto& [mm, c] : p) out.emplace(mono_mul(mm, inv), c);
  return out;
}

// Division is attempted only in the plain polynomial ring: no Exp/Root atoms
// (their exponent-refolding rules are not ring-compatible) and nonnegative
// integer exponents throughout.
static bool division_ring_ok(const Poly& p) {
  for (const auto& [m, c] : p) {
    (void)c;
    for (const auto& [a, e] : m.factors) {
      if (a.kind == AtomKind::Exp || a.kind == AtomKind::Root) return false;
      if (!is_integer(e) || e < 0) return false;
    }
  }
  return true;
}

// Componentwise divisibility of monomials; nullopt when b has an atom power
// a lacks.
static std::optional<Monomial> mono_try_div(const Monomial& a, const Monomial& b) {
  Monomial out;
  std::size_t i = 0, j = 0;
  while (i < a.factors.size() || j < b.factors.size()) {
    if (j == b.factors.size()) {
      out.factors.push_back(a.factors[i++]);
    } else if (i == a.factors.size()) {
      return std::nullopt;
    } else {
      int c = compare(a.factors[i].first, b.factors[j].first);
      if (c < 0) {
        out.factors.push_back(a.factors[i++]);
      } else if (c > 0) {
        return std::nullopt;
      } else {
        if (a.factors[i].second < b.factors[j].second) return std::nullopt;
        Rational e = a.factors[i].second - b.factors[j].second;
        if (e != 0) out.factors.emplace_back(a.factors[i].first, std::move(e));
        ++i;
        ++j;
      }
    }
  }
  return out;
}

static std::optional<Poly> try_divide(Poly a, const Poly& b) {
  Poly q;
  const auto lb = *b.rbegin();
  int guard = 0;
  while (!a.empty()) {
    if (++guard > 20000) return std::nullopt;
    const auto la = *a.rbegin();
    auto tm = mono_try_div(la.first, lb.first);
    if (!tm) return std::nullopt;
    Rational tc = la.second / lb.second;
    poly_insert(q, *tm, tc);
    for (const auto& [m, c] : b) poly_insert(a, mono_mul(*tm, m), -(tc * c));
  }
  return q;
}

// ---------------------------------------------------------------------------
// Normalization and arithmetic
// ---------------------------------------------------------------------------

Canon normalize(Poly num, Poly den) {
  if (den.empty()) throw Error("division by identically zero expression");
  if (num.empty()) return canon_zero();

  if (den.size() == 1) {
    const auto& [dm, dc] = *den.begin();
    if (dm.factors.empty() && dc == 1) return Canon{std::move(num), poly_one()};
    Monomial inv = mono_inverse(dm);
    Poly out;
    for (const auto& [m, c] : num) out.emplace(mono_mul(m, inv), c / dc);
    return Canon{std::move(out), poly_one()};
  }

  Monomial content = poly_content(den);
  if (!content.factors.empty()) {
    den = poly_div_mono(den, content);
    num = poly_div_mono(num, content);
  }

  if (division_ring_ok(den)) {
    Monomial ncontent = poly_content(num);
    Poly nhat = ncontent.factors.empty() ? num : poly_div_mono(num, ncontent);
    if (division_ring_ok(nhat)) {
      if (auto q = try_divide(nhat, den)) {
        Poly res;
        for (const auto& [m, c] : *q) res.emplace(mono_mul(m, ncontent), c);
        return Canon{std::move(res), poly_one()};
      }
      if (nhat.size() > 1) {
        if (auto q = try_divide(den, nhat)) {
          // num/den = ncontent / q
          Poly n2;
          n2.emplace(std::move(ncontent), Rational(1));
          return normalize(std::move(n2), std::move(*q));
        }
      }
    }
  }

  Rational lead = den.rbegin()->second;
  if (lead != 1) {
    for (auto& [m, c] : den) {
      (void)m;
      c /= lead;
    }
    for (auto& [m, c] : num) {
      (void)m;
      c /= lead;
    }
  }
  return Canon{std::move(num), std::move(den)};
}

// (n.num/n.den) / (d.num/d.den), for possibly unnormalized inputs.
static Canon c_div_raw(const Canon& n, const Canon& d, int depth = 0) {
  if (depth > 16) throw Error("expression normalization recursion limit");
  if (is_one_poly(n.den) && is_one_poly(d.den)) return normalize(n.num, d.num);
  Canon p = poly_mul(n.num, d.den);
  Canon q = poly_mul(n.den, d.num);
  return c_div_raw(p, q, depth + 1);
}

Canon c_add(const Canon& a, const Canon& b) {
  if (is_zero_canon(a)) return b;
  if (is_zero_canon(b)) return a;
  if (compare(a.den, b.den) == 0) {
    Poly n = a.num;
    for (const auto& [m, c] : b.num) poly_insert(n, m, c);
    return normalize(std::move(n), a.den);
  }
  Canon t1 = poly_mul(a.num, b.den);
  Canon t2 = poly_mul(b.num, a.den);
  Canon dd = poly_mul(a.den, b.den);
  return c_div_raw(c_add(t1, t2), dd);
}

Canon c_sub(const Canon& a, const Canon& b) { return c_add(a, c_neg(b)); }

Canon c_neg(const Canon& a) { return c_scale(a, Rational(-1)); }

Canon c_scale(const Canon& a, const Rational& k) {
  if (k == 0) return canon_zero();
  Canon out = a;
  for (auto& [m, c] : out.num) {
    (void)m;
    c *= k;
  }
  return out;
}

Canon c_mul(const Canon& a, const Canon& b) {
  if (is_zero_canon(a) || is_zero_canon(b)) return canon_zero();
  if (is_one_canon(a)) return b;
  if (is_one_canon(b)) return a;
  Canon n = poly_mul(a.num, b.num);
  Canon d = poly_mul(a.den, b.den);
  return c_div_raw(n, d);
}

Canon c_div(const Canon& a, const Canon& b) {
  if (is_zero_canon(b)) throw Error("division by identically zero expression");
  Canon n = poly_mul(a.num, b.den);
  Canon d = poly_mul(a.den, b.num);
  return c_div_raw(n, d);
}

Canon c_pow(const Canon& a, const Rational& e) {
  if (e == 0) return canon_one();
  if (e == 1) return a;
  if (is_zero_canon(a)) {
    if (e > 0) return canon_zero();
    throw Error("zero raised to a negative power");
  }
  long n;
  if (rational_to_long(e, n)) {
    bool invert = n < 0;
    unsigned long un = invert ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
    Canon base = a;
    Canon res = canon_one();
    while (un > 0) {
      if (un & 1u) res = c_mul(res, base);
      un >>= 1u;
      if (un > 0) base = c_mul(base, base);
    }
    return invert ? c_div(canon_one(), res) : res;
  }

  // fractional exponent
  if (!is_one_poly(a.den)) {
    return c_mul(c_pow(Canon{a.num, poly_one()}, e), c_pow(Canon{a.den, poly_one()}, -e));
  }
  if (a.num.size() == 1) {
    const auto& [m, c] = *a.num.begin();
    RawTerm t;
    t.coeff = 1;
    if (auto ec = exact_pow(c, e)) {
      t.coeff = *ec;
    } else {
      // Constant radical kept as an opaque kernel. Constant radicals are not
      // fully normalized against each other (8^(1/2) vs 2*2^(1/2)); the
      // sampled zero test covers such forms.
      Atom ra;
      ra.kind = AtomKind::Root;
      ra.base = std::make_shared<Poly>(poly_const(c));
      t.factors.emplace_back(std::move(ra), e);
    }
    for (const auto& [atom, ex] : m.factors) t.factors.emplace_back(atom, ex * e);
    return term_to_canon(std::move(t));
  }
  // multi-term base: peel off monomial content and the leading coefficient,
  // keep a Root atom over the primitive monic remainder
  Monomial content = poly_content(a.num);
  Poly prim = content.factors.empty() ? a.num : poly_div_mono(a.num, content);
  Rational lead = prim.rbegin()->second;
  if (lead != 1) {
    for (auto& [m, c] : prim) {
      (void)m;
      c /= lead;
    }
  }
  Poly scalar_part;
  scalar_part.emplace(content, lead);
  Canon res = c_pow(Canon{std::move(scalar_part), poly_one()}, e);
  RawTerm rt;
  rt.coeff = 1;
  Atom ra;
  ra.kind = AtomKind::Root;
  ra.base = std::make_shared<Poly>(std::move(prim));
  rt.factors.emplace_back(std::move(ra), e);
  return c_mul(res, term_to_canon(std::move(rt)));
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

static Canon poly_partial(const Poly& p, const Var& v);

// Derivative of the atom itself (d atom / d v); nullopt means zero.
static std::optional<Canon> atom_derivative(const Atom& a, const Var& v) {
  switch (a.kind) {
    case AtomKind::X:
      if (v.kind() == Var::Kind::X) return canon_one();
      return std::nullopt;
    case AtomKind::Jet:
      if (v.kind() == Var::Kind::Jet && v.index() == a.index) return canon_one();
      return std::nullopt;
    case AtomKind::PJet:
      if (v.kind() == Var::Kind::PJet && v.index() == a.index) return canon_one();
      return std::nullopt;
    case AtomKind::Param:
      if (v.kind() == Var::Kind::Param && v.name() == a.name) return canon_one();
      return std::nullopt;
    case AtomKind::Opaque:
      if (v.kind() == Var::Kind::X) {
        Atom d = a;
        d.index += 1;
        return canon_atom(std::move(d));
      }
      return std::nullopt;
    case AtomKind::Ln: {
      Canon da = c_partial(*a.arg, v);
      if (is_zero_canon(da)) return std::nullopt;
      return c_div(da, *a.arg);
    }
    case AtomKind::Exp: {
      Canon da = c_partial(*a.arg, v);
      if (is_zero_canon(da)) return std::nullopt;
      return c_mul(canon_atom(a), da);
    }
    case AtomKind::Root: {
      Canon da = poly_partial(*a.base, v);
      if (is_zero_canon(da)) return std::nullopt;
      return da;
    }
  }
  return std::nullopt;
}

static Canon poly_partial(const Poly& p, const Var& v) {
  Poly plain;
  Canon acc = canon_zero();
  bool have_acc = false;
  for (const auto& [m, coeff] : p) {
    for (std::size_t i = 0; i < m.factors.size(); ++i) {
      const auto& [atom, e] = m.factors[i];
      bool simple = atom.kind == AtomKind::X || atom.kind == AtomKind::Jet ||
                    atom.kind == AtomKind::PJet || atom.kind == AtomKind::Param ||
                    atom.kind == AtomKind::Opaque;
      if (simple && atom.kind != AtomKind::Opaque) {
        auto d = atom_derivative(atom, v);
        if (!d) continue;  // derivative 0
        // coeff * e * atom^(e-1) * rest; no refolding can trigger for these
        Monomial out;
        for (std::size_t j = 0; j < m.factors.size(); ++j) {
          if (j == i) {
            Rational ne = e - 1;
            if (ne != 0) out.factors.emplace_back(atom, ne);
          } else {
            out.factors.push_back(m.factors[j]);
          }
        }
        poly_insert(plain, out, coeff * e);
      } else if (atom.kind == AtomKind::Opaque) {
        if (v.kind() != Var::Kind::X) continue;
        Atom d = atom;
        d.index += 1;
        RawTerm t;
        t.coeff = coeff * e;
        for (std::size_t j = 0; j < m.factors.size(); ++j) {
          if (j == i) {
            if (e != 1) t.factors.emplace_back(atom, e - 1);
          } else {
            t.factors.push_back(m.factors[j]);
          }
        }
        t.factors.emplace_back(std::move(d), Rational(1));
        Canon r = term_to_canon(std::move(t));
        if (is_one_poly(r.den) && r.num.size() <= 1) {
          for (auto& [mm, cc] : r.num) poly_insert(plain, mm, cc);
        } else {
          acc = c_add(acc, r);
          have_acc = true;
        }
      } else {
        auto d = atom_derivative(atom, v);
        if (!d) continue;
        RawTerm t;
        t.coeff = coeff * e;
        for (std::size_t j = 0; j < m.factors.size(); ++j) {
          if (j == i) {
            if (e != 1) t.factors.emplace_back(atom, e - 1);
          } else {
            t.factors.push_back(m.factors[j]);
          }
        }
        acc = c_add(acc, c_mul(term_to_canon(std::move(t)), *d));
        have_acc = true;
      }
    }
  }
  Canon res{std::move(plain), poly_one()};
  if (have_acc) res = c_add(res, acc);
  return res;
}

Canon c_partial(const Canon& f, const Var& v) {
  Canon dn = poly_partial(f.num, v);
  if (is_one_poly(f.den)) return dn;
  Canon dd = poly_partial(f.den, v);
  Canon denc{f.den, poly_one()};
  Canon numc{f.num, poly_one()};
  Canon top = c_sub(c_mul(dn, denc), c_mul(numc, dd));
  return c_div(top, c_mul(denc, denc));
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

static Canon atom_subst_value(const Atom& a, const SubstMap& map) {
  switch (a.kind) {
    case AtomKind::X: {
      auto it = map.find(Var::x());
      return it != map.end() ? it->second : canon_atom(a);
    }
    case AtomKind::Jet: {
      auto it = map.find(Var::q(a.index));
      return it != map.end() ? it->second : canon_atom(a);
    }
    case AtomKind::PJet: {
      auto it = map.find(Var::p(a.index));
      return it != map.end() ? it->second : canon_atom(a);
    }
    case AtomKind::Param: {
      auto it = map.find(Var::param(a.name));
      return it != map.end() ? it->second : canon_atom(a);
    }
    case AtomKind::Opaque:
      return canon_atom(a);
    case AtomKind::Ln:
      return c_ln(c_subst(*a.arg, map));
    case AtomKind::Exp:
      return c_exp(c_subst(*a.arg, map));
    case AtomKind::Root:
      return c_subst(Canon{*a.base, poly_one()}, map);
  }
  return canon_atom(a);
}

Canon c_subst(const Canon& f, const SubstMap& map) {
  auto subst_poly = [&map](const Poly& p) {
    Canon acc = canon_zero();
    for (const auto& [m, coeff] : p) {
      Canon t = canon_const(coeff);
      for (const auto& [atom, e] : m.factors) {
        t = c_mul(t, c_pow(atom_subst_value(atom, map), e));
      }
      acc = c_add(acc, t);
    }
    return acc;
  };
  Canon n = subst_poly(f.num);
  if (is_one_poly(f.den)) return n;
  return c_div(n, subst_poly(f.den));
}

// ---------------------------------------------------------------------------
// Structure scans
// ---------------------------------------------------------------------------

template <typename Fn>
static void for_each_atom(const Canon& f, Fn&& fn);

template <typename Fn>
static void for_each_atom_poly(const Poly& p, Fn& fn) {
  for (const auto& [m, c] : p) {
    (void)c;
    for (const auto& [a, e] : m.factors) {
      (void)e;
      fn(a);
      if (a.kind == AtomKind::Ln || a.kind == AtomKind::Exp) {
        for_each_atom(*a.arg, fn);
      } else if (a.kind == AtomKind::Root) {
        for_each_atom_poly(*a.base, fn);
      }
    }
  }
}

template <typename Fn>
static void for_each_atom(const Canon& f, Fn&& fn) {
  for_each_atom_poly(f.num, fn);
  for_each_atom_poly(f.den, fn);
}

int max_jet_index(const Canon& f) {
  int best = -1;
  for_each_atom(f, [&best](const Atom& a) {
    if (a.kind == AtomKind::Jet && a.index > best) best = a.index;
  });
  return best;
}

int max_pjet_index(const Canon& f) {
  int best = -1;
  for_each_atom(f, [&best](const Atom& a) {
    if (a.kind == AtomKind::PJet && a.index > best) best = a.index;
  });
  return best;
}

bool has_inexact_atoms(const Canon& f) {
  bool found = false;
  for_each_atom(f, [&found](const Atom& a) {
    if (a.kind == AtomKind::Ln || a.kind == AtomKind::Exp || a.kind == AtomKind::Opaque ||
        a.kind == AtomKind::Root)
      found = true;
  });
  return found;
}

void collect_params(const Canon& f, std::set<std::string>& out) {
  for_each_atom(f, [&out](const Atom& a) {
    if (a.kind == AtomKind::Param) out.insert(a.name);
  });
}

void collect_opaques(const Canon& f, std::set<std::string>& out) {
  for_each_atom(f, [&out](const Atom& a) {
    if (a.kind == AtomKind::Opaque) out.insert(a.name);
  });
}

// ---------------------------------------------------------------------------
// Tree <-> canonical conversion
// ---------------------------------------------------------------------------

Canon canon_of_node(const Node& n) {
  switch (n.kind) {
    case Node::Kind::Number:
      return canon_const(n.value);
    case Node::Kind::X:
      return canon_var(Var::x());
    case Node::Kind::Jet:
      return canon_var(Var::q(n.index));
    case Node::Kind::PJet:
      return canon_var(Var::p(n.index));
    case Node::Kind::Param:
      return canon_var(Var::param(n.name));
    case Node::Kind::Opaque: {
      Atom a;
      a.kind = AtomKind::Opaque;
      a.name = n.name;
      a.index = n.index;
      return canon_atom(std::move(a));
    }
    case Node::Kind::Add: {
      Canon acc = canon_zero();
      for (const auto& k : n.kids) acc = c_add(acc, canon_of_node(*k));
      return acc;
    }
    case Node::Kind::Mul: {
      Canon acc = canon_one();
      for (const auto& k : n.kids) acc = c_mul(acc, canon_of_node(*k));
      return acc;
    }
    case Node::Kind::Pow:
      return c_pow(canon_of_node(*n.kids[0]), n.value);
    case Node::Kind::Ln:
      return c_ln(canon_of_node(*n.kids[0]));
    case Node::Kind::Exp:
      return c_exp(canon_of_node(*n.kids[0]));
  }
  throw Error("corrupt expression tree");
}

static NodePtr node_of_poly(const Poly& p);

static NodePtr node_of_atom(const Atom& a) {
  switch (a.kind) {
    case AtomKind::X:
      return make_x();
    case AtomKind::Jet:
      return make_jet(a.index);
    case AtomKind::PJet:
      return make_pjet(a.index);
    case AtomKind::Param:
      return make_param(a.name);
    case AtomKind::Opaque:
      return make_opaque(a.name, a.index);
    case AtomKind::Ln:
      return make_ln(node_of_canon(*a.arg));
    case AtomKind::Exp:
      return make_exp(node_of_canon(*a.arg));
    case AtomKind::Root:
      return node_of_poly(*a.base);
  }
  throw Error("corrupt atom");
}

static NodePtr node_of_poly(const Poly& p) {
  if (p.empty()) return make_number(0);
  std::vector<NodePtr> terms;
  for (auto it = p.rbegin(); it != p.rend(); ++it) {
    std::vector<NodePtr> fs;
    if (it->second != 1 || it->first.factors.empty()) fs.push_back(make_number(it->second));
    for (const auto& [a, e] : it->first.factors) {
      NodePtr at = node_of_atom(a);
      fs.push_back(e == 1 ? at : make_pow(at, e));
    }
    terms.push_back(fs.size() == 1 ? fs[0] : make_mul(std::move(fs)));
  }
  return terms.size() == 1 ? terms[0] : make_add(std::move(terms));
}

NodePtr node_of_canon(const Canon& c) {
  NodePtr n = node_of_poly(c.num);
  if (is_one_poly(c.den)) return n;
  return make_mul({n, make_pow(node_of_poly(c.den), Rational(-1))});
}

// ---------------------------------------------------------------------------
// Printing (canonical form, re-parseable)
// ---------------------------------------------------------------------------

static std::string coeff_string(const Rational& c) {
  if (is_integer(c)) return numerator(c).str();
  return "(" + numerator(c).str() + "/" + denominator(c).str() + ")";
}

static std::string exponent_suffix(const Rational& e) {
  if (e == 1) return "";
  if (is_integer(e) && e > 0) return "^" + numerator(e).str();
  std::string body = numerator(e).str();
  if (!is_integer(e)) body += "/" + denominator(e).str();
  return "^(" + body + ")";
}

static std::string print_poly(const Poly& p);

static std::string atom_string(const Atom& a) {
  switch (a.kind) {
    case AtomKind::X:
      return "x";
    case AtomKind::Jet:
      return "q" + std::to_string(a.index);
    case AtomKind::PJet:
      return "p" + std::to_string(a.index);
    case AtomKind::Param:
      return a.name;
    case AtomKind::Opaque:
      return a.name + std::string(static_cast<std::size_t>(a.index), '\'') + "(x)";
    case AtomKind::Ln:
      return "ln(" + print_canon(*a.arg) + ")";
    case AtomKind::Exp:
      return "exp(" + print_canon(*a.arg) + ")";
    case AtomKind::Root:
      return "(" + print_poly(*a.base) + ")";
  }
  return "?";
}

// Renders |coeff| * monomial; sign is handled by the caller.
static std::string term_string(const Monomial& m, const Rational& abs_coeff) {
  std::vector<std::string> top;
  std::vector<std::string> bottom;
  for (const auto& [a, e] : m.factors) {
    if (e > 0)
      top.push_back(atom_string(a) + exponent_suffix(e));
    else
      bottom.push_back(atom_string(a) + exponent_suffix(-e));
  }
  std::string out;
  if (top.empty()) {
    out = coeff_string(abs_coeff);
  } else {
    if (abs_coeff != 1) out = coeff_string(abs_coeff) + "*";
    for (std::size_t i = 0; i < top.size(); ++i) {
      if (i > 0) out += "*";
      out += top[i];
    }
  }
  for (const auto& b : bottom) out += "/" + b;
  return out;
}

static std::string print_poly(const Poly& p) {
  if (p.empty()) return "0";
  std::string out;
  bool first = true;
  for (auto it = p.rbegin(); it != p.rend(); ++it) {
    bool neg = it->second < 0;
    Rational a = neg ? Rational(-it->second) : it->second;
    if (first) {
      if (neg) out += "-";
      first = false;
    } else {
      out += neg ? " - " : " + ";
    }
    out += term_string(it->first, a);
  }
  return out;
}

std::string print_canon(const Canon& c) {
  std::string ns = print_poly(c.num);
  if (is_one_poly(c.den)) return ns;
  if (c.num.size() > 1) ns = "(" + ns + ")";
  return ns + "/(" + print_poly(c.den) + ")";
}

// ---------------------------------------------------------------------------
// Evaluation (complex internally; see expr.hpp)
// ---------------------------------------------------------------------------

using Cx = std::complex<double>;

static Cx cpow(const Cx& z, const Rational& e) {
  long n;
  if (rational_to_long(e, n) && n >= -16 && n <= 16) {
    if (n == 0) return Cx(1.0, 0.0);
    Cx base = n < 0 ? Cx(1.0, 0.0) / z : z;
    unsigned long un = static_cast<unsigned long>(n < 0 ? -n : n);
    Cx res(1.0, 0.0);
    while (un > 0) {
      if (un & 1u) res *= base;
      un >>= 1u;
      if (un > 0) base *= base;
    }
    return res;
  }
  return std::pow(z, Cx(to_double(e), 0.0));
}

static Cx eval_log(const Cx& z) {
  if (z == Cx(0.0, 0.0)) throw EvalError("ln of zero");
  return std::log(z);
}

static double jet_at(const EvalCtx& ctx, int j, bool pfamily) {
  if (ctx.point == nullptr) throw EvalError("no evaluation point supplied");
  const auto& v = pfamily ? ctx.point->p : ctx.point->q;
  if (j < 0 || static_cast<std::size_t>(j) >= v.size())
    throw EvalError(std::string("jet point does not supply ") + (pfamily ? "p" : "q") +
                    std::to_string(j));
  return v[static_cast<std::size_t>(j)];
}

static Cx eval_poly_cx(const Poly& p, const EvalCtx& ctx, double* magnitude);

static Cx eval_atom(const Atom& a, const EvalCtx& ctx) {
  switch (a.kind) {
    case AtomKind::X:
      if (ctx.point == nullptr) throw EvalError("no evaluation point supplied");
      return Cx(ctx.point->x, 0.0);
    case AtomKind::Jet:
      return Cx(jet_at(ctx, a.index, false), 0.0);
    case AtomKind::PJet:
      return Cx(jet_at(ctx, a.index, true), 0.0);
    case AtomKind::Param: {
      if (ctx.bindings != nullptr) {
        auto it = ctx.bindings->params.find(a.name);
        if (it != ctx.bindings->params.end()) return Cx(it->second, 0.0);
      }
      throw EvalError("missing binding for parameter " + a.name);
    }
    case AtomKind::Opaque: {
      if (ctx.bindings != nullptr) {
        auto it = ctx.bindings->opaque.find(a.name);
        if (it != ctx.bindings->opaque.end()) {
          if (ctx.point == nullptr) throw EvalError("no evaluation point supplied");
          return Cx(it->second(a.index, ctx.point->x), 0.0);
        }
      }
      throw EvalError("missing binding for opaque symbol " + a.name);
    }
    case AtomKind::Ln:
      return eval_log(eval_canon(*a.arg, ctx));
    case AtomKind::Exp:
      return std::exp(eval_canon(*a.arg, ctx));
    case AtomKind::Root:
      return eval_poly_cx(*a.base, ctx, nullptr);
  }
  throw EvalError("corrupt atom");
}

static Cx eval_poly_cx(const Poly& p, const EvalCtx& ctx, double* magnitude) {
  Cx sum(0.0, 0.0);
  for (const auto& [m, c] : p) {
    Cx t(to_double(c), 0.0);
    for (const auto& [a, e] : m.factors) t *= cpow(eval_atom(a, ctx), e);
    sum += t;
    if (magnitude != nullptr) *magnitude += std::abs(t);
  }
  return sum;
}

std::complex<double> eval_canon(const Canon& c, const EvalCtx& ctx, double* magnitude) {
  double mag = 0.0;
  Cx n = eval_poly_cx(c.num, ctx, magnitude != nullptr ? &mag : nullptr);
  Cx r = n;
  if (!is_one_poly(c.den)) {
    Cx d = eval_poly_cx(c.den, ctx, nullptr);
    if (std::abs(d) == 0.0) throw EvalError("singular evaluation (zero denominator)");
    r = n / d;
    if (magnitude != nullptr) mag /= std::abs(d);
  }
  if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
    throw EvalError("singular evaluation (non-finite value)");
  if (magnitude != nullptr) *magnitude = mag;
  return r;
}

std::complex<double> eval_node(const Node& n, const EvalCtx& ctx) {
  Cx r(0.0, 0.0);
  switch (n.kind) {
    case Node::Kind::Number:
      r = Cx(to_double(n.value), 0.0);
      break;
    case Node::Kind::X:
      if (ctx.point == nullptr) throw EvalError("no evaluation point supplied");
      r = Cx(ctx.point->x, 0.0);
      break;
    case Node::Kind::Jet:
      r = Cx(jet_at(ctx, n.index, false), 0.0);
      break;
    case Node::Kind::PJet:
      r = Cx(jet_at(ctx, n.index, true), 0.0);
      break;
    case Node::Kind::Param: {
      Atom a;
      a.kind = AtomKind::Param;
      a.name = n.name;
      r = eval_atom(a, ctx);
      break;
    }
    case Node::Kind::Opaque: {
      Atom a;
      a.kind = AtomKind::Opaque;
      a.name = n.name;
      a.index = n.index;
      r = eval_atom(a, ctx);
      break;
    }
    case Node::Kind::Add:
      for (const auto& k : n.kids) r += eval_node(*k, ctx);
      break;
    case Node::Kind::Mul:
      r = Cx(1.0, 0.0);
      for (const auto& k : n.kids) r *= eval_node(*k, ctx);
      break;
    case Node::Kind::Pow:
      r = cpow(eval_node(*n.kids[0], ctx), n.value);
      break;
    case Node::Kind::Ln:
      r = eval_log(eval_node(*n.kids[0], ctx));
      break;
    case Node::Kind::Exp:
      r = std::exp(eval_node(*n.kids[0], ctx));
      break;
  }
  if (!std::isfinite(r.real()) || !std::isfinite(r.imag()))
    throw EvalError("singular evaluation (non-finite value)");
  return r;
}

}  // namespace localscore::detail
