#include "localscore/operators.hpp"

#include <random>

#include "qfunction_access.hpp"

namespace localscore::ops {

using detail::Canon;
using detail::c_add;
using detail::c_mul;
using detail::c_partial;
using detail::c_scale;
using detail::c_sub;
using detail::canon_var;
using detail::canon_zero;
using detail::is_zero_canon;
using detail::max_jet_index;
using detail::max_pjet_index;

static const Canon& canon(const QFunction& f) { return QFunctionAccess::canon(f); }
static QFunction wrap(Canon c) { return QFunctionAccess::from_canon(std::move(c)); }

QFunction D(const QFunction& f) {
  const Canon& c = canon(f);
  Canon acc = c_partial(c, Var::x());
  int mq = max_jet_index(c);
  for (int j = 0; j <= mq; ++j) {
    Canon pj = c_partial(c, Var::q(j));
    if (is_zero_canon(pj)) continue;
    acc = c_add(acc, c_mul(canon_var(Var::q(j + 1)), pj));
  }
  int mp = max_pjet_index(c);
  for (int j = 0; j <= mp; ++j) {
    Canon pj = c_partial(c, Var::p(j));
    if (is_zero_canon(pj)) continue;
    acc = c_add(acc, c_mul(canon_var(Var::p(j + 1)), pj));
  }
  return wrap(std::move(acc));
}

QFunction E(const QFunction& f) {
  const Canon& c = canon(f);
  Canon acc = canon_zero();
  int mq = max_jet_index(c);
  for (int j = 0; j <= mq; ++j) {
    Canon pj = c_partial(c, Var::q(j));
    if (is_zero_canon(pj)) continue;
    acc = c_add(acc, c_mul(canon_var(Var::q(j)), pj));
  }
  return wrap(std::move(acc));
}

QFunction Lambda(const QFunction& f) {
  const Canon& c = canon(f);
  int m = max_jet_index(c);
  QFunction acc = 0;
  for (int k = 0; k <= m; ++k) {
    Canon pk = c_partial(c, Var::q(k));
    if (is_zero_canon(pk)) continue;
    QFunction term = wrap(std::move(pk));
    for (int i = 0; i < k; ++i) term = D(term);
    acc = (k % 2 == 0) ? acc + term : acc - term;
  }
  return acc.canonical();
}

QFunction L(const QFunction& f) {
  const Canon& c = canon(f);
  int m = max_jet_index(c);
  QFunction acc = 0;
  for (int k = 0; k <= m; ++k) {
    Canon pk = c_partial(c, Var::q(k));
    if (is_zero_canon(pk)) continue;
    QFunction term = wrap(c_mul(canon_var(Var::q(0)), pk));
    for (int i = 0; i < k; ++i) term = D(term);
    acc = (k % 2 == 0) ? acc - term : acc + term;
  }
  return acc.canonical();
}

QFunction B(int r, const QFunction& f) {
  if (r < -1) throw DomainError("B_r is defined for r >= -1");
  const Canon& c = canon(f);
  int m = max_jet_index(c);
  QFunction acc = 0;
  for (int k = std::max(r + 1, 0); k <= m; ++k) {
    Canon pk = c_partial(c, Var::q(k));
    if (is_zero_canon(pk)) continue;
    QFunction term = wrap(std::move(pk));
    for (int i = 0; i < k - 1 - r; ++i) term = D(term);
    acc = ((k - 1 - r) % 2 == 0) ? acc + term : acc - term;
  }
  return acc.canonical();
}

QFunction C(const QFunction& f) {
  const Canon& c = canon(f);
  int m = max_jet_index(c);
  QFunction acc = 0;
  for (int r = 0; r < m; ++r) {
    QFunction br = B(r, f);
    if (br.is_zero().zero) continue;
    acc = acc + QFunction::q(r) * br;
  }
  return acc.canonical();
}

ZeroCheck is_homogeneous(const QFunction& f, const Rational& h) {
  const Canon& cf = canon(f);
  QFunction ef = E(f);  // keep alive: canon() returns a cached reference
  return detail::zero_check_canon(c_sub(canon(ef), c_scale(cf, h)));
}

// --- homogeneity degree ------------------------------------------------------

namespace {

std::optional<Rational> poly_uniform_degree(const detail::Poly& p);

std::optional<Rational> canon_uniform_degree(const Canon& c) {
  auto dn = poly_uniform_degree(c.num);
  auto dd = poly_uniform_degree(c.den);
  if (!dn || !dd) return std::nullopt;
  return *dn - *dd;
}

std::optional<Rational> mono_degree(const detail::Monomial& m) {
  Rational d = 0;
  for (const auto& [a, e] : m.factors) {
    switch (a.kind) {
      case detail::AtomKind::Jet:
        d += e;
        break;
      case detail::AtomKind::X:
      case detail::AtomKind::PJet:
      case detail::AtomKind::Param:
      case detail::AtomKind::Opaque:
        break;
      case detail::AtomKind::Ln:
      case detail::AtomKind::Exp: {
        auto ad = canon_uniform_degree(*a.arg);
        if (!ad || *ad != 0) return std::nullopt;
        break;
      }
      case detail::AtomKind::Root: {
        auto bd = poly_uniform_degree(*a.base);
        if (!bd) return std::nullopt;
        d += *bd * e;
        break;
      }
    }
  }
  return d;
}

std::optional<Rational> poly_uniform_degree(const detail::Poly& p) {
  std::optional<Rational> d;
  for (const auto& [m, c] : p) {
    (void)c;
    auto md = mono_degree(m);
    if (!md) return std::nullopt;
    if (d && *d != *md) return std::nullopt;
    d = md;
  }
  if (!d) return Rational(0);
  return d;
}

double eval_real(const Canon& c, const detail::EvalCtx& ctx) {
  auto z = detail::eval_canon(c, ctx);
  if (std::abs(z.imag()) > 1e-9 * (1.0 + std::abs(z.real())))
    throw EvalError("complex value in homogeneity probe");
  return z.real();
}

}  // namespace

std::optional<Rational> homogeneity_degree(const QFunction& f) {
  const Canon& cf = canon(f);
  if (detail::is_zero_canon(cf)) return Rational(0);  // 0 is homogeneous of every degree

  if (auto d = canon_uniform_degree(cf)) {
    // Monomials of one jet degree (with 0-homogeneous transcendental kernels)
    // scale exactly; no further check needed.
    return d;
  }

  // Ratio probe: h = (E f)/f at a sample point, snapped to a small rational,
  // then verified by the zero test.
  QFunction ef = E(f);  // keep alive: canon() returns a cached reference
  const Canon& ce = canon(ef);
  std::mt19937_64 rng(0x3c6ef372fe94f82bULL);
  for (int tries = 0; tries < 40; ++tries) {
    auto s = detail::random_sample_for(cf, rng);
    detail::EvalCtx ctx{&s.point, &s.bindings};
    try {
      double v = eval_real(cf, ctx);
      double ve = eval_real(ce, ctx);
      if (std::abs(v) < 1e-6 * (1.0 + std::abs(ve))) continue;
      auto h = snap_to_rational(ve / v, 12, 1e-6);
      if (!h) return std::nullopt;
      if (detail::zero_check_canon(c_sub(ce, c_scale(cf, *h))).zero) return h;
      return std::nullopt;
    } catch (const EvalError&) {
      continue;
    }
  }
  return std::nullopt;
}

// --- operator composition ----------------------------------------------------

OperatorExpr OperatorExpr::identity() {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::Identity, 0, std::nullopt, std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::d() {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::D, 0, std::nullopt, std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::e() {
  OperatorExpr x;
  x.prims_.push_back({Prim::Kind::E, 0, std::nullopt, std::nullopt});
  return x;
}
OperatorExpr OperatorExpr::lambda() {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::Lambda, 0, std::nullopt, std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::l() {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::L, 0, std::nullopt, std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::b(int r) {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::B, r, std::nullopt, std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::c() {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::C, 0, std::nullopt, std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::multiply_by(QFunction g) {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::Multiply, 0, std::move(g), std::nullopt});
  return e;
}
OperatorExpr OperatorExpr::partial(Var v) {
  OperatorExpr e;
  e.prims_.push_back({Prim::Kind::Partial, 0, std::nullopt, std::move(v)});
  return e;
}

OperatorExpr OperatorExpr::operator*(const OperatorExpr& rhs) const {
  OperatorExpr out = *this;
  out.prims_.insert(out.prims_.end(), rhs.prims_.begin(), rhs.prims_.end());
  return out;
}

QFunction OperatorExpr::apply(const QFunction& f) const {
  QFunction cur = f;
  for (auto it = prims_.rbegin(); it != prims_.rend(); ++it) {
    switch (it->kind) {
      case Prim::Kind::D: cur = D(cur); break;
      case Prim::Kind::E: cur = E(cur); break;
      case Prim::Kind::Lambda: cur = Lambda(cur); break;
      case Prim::Kind::L: cur = L(cur); break;
      case Prim::Kind::B: cur = B(it->r, cur); break;
      case Prim::Kind::C: cur = C(cur); break;
      case Prim::Kind::Multiply: cur = (*it->g * cur).canonical(); break;
      case Prim::Kind::Partial: cur = cur.partial(*it->v); break;
      case Prim::Kind::Identity: break;
    }
  }
  return cur;
}

}  // namespace localscore::ops
