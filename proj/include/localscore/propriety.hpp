#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "localscore/density.hpp"
#include "localscore/expr.hpp"

namespace localscore::propriety {

// --- concavity ---------------------------------------------------------------

enum class ConcavityVerdict { StrictlyConcave, Concave, NotConcave };

struct ConcavityWitness {
  double x;
  std::vector<double> u;  // the point (u_1..u_m) with a positive eigenvalue
  double eigenvalue;
};

// Sample-based verdict: never a proof, always tagged with the sample count.
struct ConcavityReport {
  ConcavityVerdict verdict;
  std::optional<ConcavityWitness> witness;
  int samples_used = 0;
};

// Forms Phi(x, u) = phi(x, 1, u) and inspects its Hessian in u at sampled
// points (u = 0 is always probed). Eigenvalue > 1e-7 at any point: not
// concave, with a witness; all eigenvalues < -1e-10: strictly concave;
// otherwise concave.
ConcavityReport check_concavity(const QFunction& phi, int sample_count,
                                std::uint64_t seed = 0);

// --- divergence decomposition -------------------------------------------------

struct Quadrature {
  double value;
  double abs_err;
};

// d0(P,Q) = integral of phi(q) + sum_k (p_k - q_k) phi_[k](q) - phi(p) over
// the truncated support of P; phi must be 1-homogeneous.
Quadrature integral_divergence(const QFunction& phi, const DensitySpec& P, const DensitySpec& Q);

// The symbolic boundary divergence sum_r p_r B_r {phi(q) - phi(p)}, as an
// expression in x, q_j and the second jet family p_j.
QFunction boundary_divergence_expr(const QFunction& phi);

// d_b evaluated at x.
double boundary_divergence(const QFunction& phi, const DensitySpec& P, const DensitySpec& Q,
                           double x);

enum class LimitVerdict { Vanishes, Nonzero, Divergent, Inconclusive };

struct EndpointDiagnostic {
  LimitVerdict verdict = LimitVerdict::Inconclusive;
  double limit = 0.0;                               // last sequence value
  std::vector<std::pair<double, double>> sequence;  // (x, value) toward the end
};

struct BoundaryReport {
  EndpointDiagnostic lower, upper;
};

BoundaryReport boundary_limit_diagnostic(const QFunction& phi, const DensitySpec& P,
                                         const DensitySpec& Q);

// Same diagnostics for an arbitrary boundary expression in (x, q_j, p_j),
// e.g. a chart-transported validity condition.
BoundaryReport boundary_limit_diagnostic_expr(const QFunction& expr, const DensitySpec& P,
                                              const DensitySpec& Q);

// --- entropy -------------------------------------------------------------------

struct EntropyReport {
  double H0;  // integral entropy, quadrature of phi(p)
  double H0_err;
  double Hb_lower, Hb_upper;  // limits of the boundary entropy C phi
};

EntropyReport entropy(const QFunction& phi, const DensitySpec& P);

// --- gauge change ----------------------------------------------------------------

struct GaugeShiftReport {
  double dhat_lower, dhat_upper;       // end-point limits of d-hat
  double d0_base, d0_transformed;      // d0 under phi and under phi + D psi
  double gap;                          // |d0* - (d0 + dhat_+ + dhat_-)|
  QFunction dhat_expr;                 // sum_k p_k psi_[k](q) - psi(p)
};

GaugeShiftReport gauge_shift_report(const QFunction& phi, const QFunction& psi,
                                    const DensitySpec& P, const DensitySpec& Q);

// --- full report ------------------------------------------------------------------

struct DivergenceReport {
  double d0 = 0.0;
  double quadrature_abs_err = 0.0;
  double d_plus = 0.0;   // -d_b at the upper end
  double d_minus = 0.0;  // +d_b at the lower end
  double total = 0.0;    // d0 + d_plus + d_minus
  BoundaryReport boundary;
};

DivergenceReport divergence_report(const QFunction& phi, const DensitySpec& P,
                                   const DensitySpec& Q);

// Expected-score decomposition S = S0 + S+ + S- (integration by parts),
// with `total` computed independently as the quadrature of p * s.
struct ScoreSplit {
  double total;
  double integral;      // S0
  double s_plus, s_minus;
  double err;
  double gap;           // |total - (S0 + S+ + S-)|
};

ScoreSplit expected_score_decomposition(const QFunction& phi, const DensitySpec& P,
                                        const DensitySpec& Q);

}  // namespace localscore::propriety
