#pragma once

#include <optional>
#include <string>
#include <vector>

#include "localscore/expr.hpp"

namespace localscore::rules {

// Outcome of a verification run on a rule; exact when decided by the
// canonical form alone.
struct CheckStatus {
  bool passed = false;
  bool exact = false;
};

enum class GaugeTag { User, Standard, Transformed };

// A key local scoring rule: s solves L s = 0 and is 0-homogeneous, usually
// remembered together with a 1-homogeneous generator phi with s = Lambda phi.
struct ScoringRule {
  QFunction s;
  std::optional<QFunction> generator;
  GaugeTag gauge = GaugeTag::User;
  CheckStatus key_equation;      // L s = 0
  CheckStatus zero_homogeneous;  // E s = 0
};

// s = Lambda(phi) for 1-homogeneous phi; verifies the key equation and
// 0-homogeneity eagerly. Throws DomainError when phi is not 1-homogeneous.
ScoringRule generate(const QFunction& phi);

// s = (I - L) g for 0-homogeneous g; same rule as generate(q0 * g).
ScoringRule derive_from(const QFunction& g);

// phi + D psi for 1-homogeneous psi; generates the identical rule.
QFunction gauge_transform(const QFunction& phi, const QFunction& psi);

// The gauge choice phi = q0 * s, whose boundary entropy C phi vanishes
// identically. Throws DomainError when the rule fails the key equation.
QFunction standard_gauge(const ScoringRule& rule);

// True iff the generated scores differ by a function of x alone.
bool equivalent(const QFunction& phi1, const QFunction& phi2);

// Gauge-equivalent generator of order <= t-1, for phi of order t with
// phi_[tt] = 0 and polynomial dependence on q_{t-1}. Iterating this is the
// engine's route to the odd-order nonexistence argument.
QFunction reduce_gauge_order(const QFunction& phi);

// --- catalogue --------------------------------------------------------------

QFunction log_score();  // s = -ln q0; L s = 1, not a key rule

ScoringRule hyvarinen();
ScoringRule power_family(int k);  // phi = -q1^k / q0^(k-1), k >= 1
ScoringRule modified_hyvarinen();

// "hyvarinen", "modified_hyvarinen" (alias "modified"), "powerK" (e.g.
// "power3"). Throws DomainError for unknown names.
ScoringRule by_name(const std::string& name);
std::vector<std::string> catalogue_names();

}  // namespace localscore::rules
