#include "localscore/rules.hpp"

#include <algorithm>
#include <cctype>

#include "localscore/operators.hpp"
#include "qfunction_access.hpp"

namespace localscore::rules {

using detail::Canon;

namespace {

CheckStatus status_of(const ZeroCheck& z) { return CheckStatus{z.zero, z.exact}; }

void require_homogeneous(const QFunction& f, int degree, const char* who) {
  if (!ops::is_homogeneous(f, Rational(degree)).zero)
    throw DomainError(std::string(who) + " must be " + std::to_string(degree) + "-homogeneous");
}

ScoringRule finish_rule(QFunction s, std::optional<QFunction> generator, GaugeTag tag) {
  ScoringRule rule;
  rule.s = std::move(s);
  rule.generator = std::move(generator);
  rule.gauge = tag;
  rule.key_equation = status_of(ops::L(rule.s).is_zero());
  rule.zero_homogeneous = status_of(ops::E(rule.s).is_zero());
  return rule;
}

}  // namespace

ScoringRule generate(const QFunction& phi) {
  require_homogeneous(phi, 1, "generator phi");
  return finish_rule(ops::Lambda(phi), phi.canonical(), GaugeTag::User);
}

ScoringRule derive_from(const QFunction& g) {
  require_homogeneous(g, 0, "deriving function g");
  QFunction s = (g - ops::L(g)).canonical();
  return finish_rule(std::move(s), (QFunction::q(0) * g).canonical(), GaugeTag::User);
}

QFunction gauge_transform(const QFunction& phi, const QFunction& psi) {
  require_homogeneous(psi, 1, "gauge function psi");
  QFunction phistar = (phi + ops::D(psi)).canonical();
  if (!equal_functions(ops::Lambda(phistar), ops::Lambda(phi)).zero)
    throw Error("gauge transform failed to preserve the generated rule");
  return phistar;
}

QFunction standard_gauge(const ScoringRule& rule) {
  if (!ops::L(rule.s).is_zero().zero)
    throw DomainError("standard gauge requires the key equation L s = 0");
  QFunction phi = (QFunction::q(0) * rule.s).canonical();
  if (!equal_functions(ops::Lambda(phi), rule.s).zero)
    throw Error("standard gauge failed to regenerate the rule");
  return phi;
}

bool equivalent(const QFunction& phi1, const QFunction& phi2) {
  require_homogeneous(phi1, 1, "phi1");
  require_homogeneous(phi2, 1, "phi2");
  QFunction diff = (ops::Lambda(phi2) - ops::Lambda(phi1)).canonical();
  return diff.order() == kOrderQFree;
}

QFunction reduce_gauge_order(const QFunction& phi) {
  require_homogeneous(phi, 1, "generator phi");
  int t = phi.order();
  if (t <= 0) return phi.canonical();

  QFunction a = phi.partial(Var::q(t));
  if (!a.partial(Var::q(t)).is_zero().zero)
    throw DomainError("no gauge reduction: phi_[tt] != 0 (the rule has exact order 2t)");

  // psi = -integral_0^{q_{t-1}} A(x, q0, ..., q_{t-2}, z) dz, termwise on the
  // canonical form; requires polynomial dependence on q_{t-1}.
  const Canon& ca = QFunctionAccess::canon(a);
  Var qt1 = Var::q(t - 1);
  if (!detail::is_zero_canon(detail::c_partial(Canon{ca.den, detail::poly_one()}, qt1)))
    throw DomainError("antiderivative outside the expression language (q_(t-1) in a denominator)");

  Canon psi = detail::canon_zero();
  for (const auto& [mono, coeff] : ca.num) {
    Rational e(0);
    detail::Monomial rest;
    for (const auto& [atom, ex] : mono.factors) {
      if (atom.kind == detail::AtomKind::Jet && atom.index == t - 1) {
        e = ex;
        continue;
      }
      // q_{t-1} hidden inside a transcendental kernel is not polynomial
      if (atom.kind == detail::AtomKind::Ln || atom.kind == detail::AtomKind::Exp ||
          atom.kind == detail::AtomKind::Root) {
        Canon av = detail::canon_atom(atom);
        if (!detail::is_zero_canon(detail::c_partial(av, qt1)))
          throw DomainError("antiderivative outside the expression language");
      }
      rest.factors.emplace_back(atom, ex);
    }
    if (!is_integer(e) || e < 0)
      throw DomainError("antiderivative outside the expression language (nonpolynomial power)");
    detail::Monomial out = rest;
    out.factors.emplace_back(detail::Atom{detail::AtomKind::Jet, t - 1, {}, {}, {}}, e + 1);
    std::sort(out.factors.begin(), out.factors.end(),
              [](const auto& x, const auto& y) { return detail::compare(x.first, y.first) < 0; });
    detail::Poly term;
    term.emplace(std::move(out), -coeff / (e + 1));
    psi = detail::c_add(psi, Canon{std::move(term), detail::poly_one()});
  }

  QFunction psi_q = QFunctionAccess::from_canon(std::move(psi));
  QFunction phistar = gauge_transform(phi, psi_q);
  if (phistar.order() > t - 1) throw Error("gauge reduction failed to lower the order");
  return phistar;
}

// --- catalogue --------------------------------------------------------------

QFunction log_score() { return (-ln(QFunction::q(0))).canonical(); }

ScoringRule hyvarinen() { return generate(QFunction::parse("-(1/2)*q1^2/q0")); }

ScoringRule power_family(int k) {
  if (k < 1) throw DomainError("power family needs k >= 1");
  QFunction phi = -pow(QFunction::q(1), Rational(k)) / pow(QFunction::q(0), Rational(k - 1));
  return generate(phi);
}

ScoringRule modified_hyvarinen() {
  QFunction g = QFunction::parse("-(1/2)*(1 + x*q1/q0)^2");
  ScoringRule rule = derive_from(g);
  rule.gauge = GaugeTag::Transformed;
  return rule;
}

ScoringRule by_name(const std::string& name) {
  if (name == "hyvarinen") return hyvarinen();
  if (name == "modified" || name == "modified_hyvarinen") return modified_hyvarinen();
  if (name.rfind("power", 0) == 0 && name.size() > 5) {
    int k = 0;
    for (std::size_t i = 5; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i])))
        throw DomainError("unknown rule name: " + name);
      k = k * 10 + (name[i] - '0');
    }
    return power_family(k);
  }
  throw DomainError("unknown rule name: " + name);
}

std::vector<std::string> catalogue_names() {
  return {"hyvarinen", "modified_hyvarinen", "power1", "power2", "power3", "power4"};
}

}  // namespace localscore::rules
