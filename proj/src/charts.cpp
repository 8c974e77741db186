#include "localscore/charts.hpp"

#include <random>

#include "localscore/operators.hpp"
#include "localscore/propriety.hpp"
#include "qfunction_access.hpp"

namespace localscore::charts {

namespace {

void require_x_expression(const QFunction& f, const char* who) {
  if (f.order() != kOrderQFree || f.pjet_order() != kOrderQFree)
    throw DomainError(std::string(who) + " must be an expression in x alone");
  std::set<std::string> names;
  detail::collect_opaques(QFunctionAccess::canon(f), names);
  detail::collect_params(QFunctionAccess::canon(f), names);
  if (!names.empty())
    throw DomainError(std::string(who) + " must not contain opaque or parameter symbols");
}

void require_no_opaque(const QFunction& f, const char* who) {
  std::set<std::string> names;
  detail::collect_opaques(QFunctionAccess::canon(f), names);
  if (!names.empty())
    throw DomainError(std::string(who) + ": opaque symbols cannot be transported through a chart");
}

}  // namespace

ChartMap ChartMap::make(const QFunction& gamma, const QFunction& delta, int max_order,
                        double check_lo, double check_hi) {
  require_x_expression(gamma, "chart map gamma");
  require_x_expression(delta, "chart inverse delta");
  if (max_order < 0) throw DomainError("chart max_order must be nonnegative");

  ChartMap chart;
  chart.gamma_ = gamma.canonical();
  chart.delta_ = delta.canonical();
  chart.max_order_ = max_order;
  chart.zero_ = QFunction(0);

  QFunction gprime = gamma.partial(Var::x());
  if (gprime.is_zero().zero) throw DomainError("chart map gamma must not be constant");
  chart.alpha_ = (QFunction(1) / gprime).canonical();

  // monotonicity sampled, not proved
  std::mt19937_64 rng(0x8f1bbcdc0d3f2a6bULL);
  std::uniform_real_distribution<double> xs(check_lo, check_hi);
  for (int i = 0; i < 50; ++i) {
    JetPoint pt;
    pt.x = xs(rng);
    double g1;
    try {
      g1 = gprime.evaluate(pt);
    } catch (const EvalError&) {
      continue;
    }
    if (!(g1 > 0.0))
      throw DomainError("chart map gamma must be strictly increasing (gamma' > 0 failed)");
  }

  QFunction compose = chart.gamma_.substitute({{Var::x(), chart.delta_}});
  if (!equal_functions(compose, QFunction::x()).zero)
    throw DomainError("delta does not invert gamma (gamma(delta(x)) != x)");

  // forward coefficients
  chart.a_.assign(static_cast<std::size_t>(max_order) + 1, {});
  chart.a_[0].push_back(chart.alpha_);
  for (int k = 0; k < max_order; ++k) {
    auto& next = chart.a_[static_cast<std::size_t>(k) + 1];
    for (int r = 0; r <= k + 1; ++r) {
      const QFunction& up = r <= k ? chart.a_[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)]
                                   : chart.zero_;
      const QFunction& left = r >= 1 ? chart.a_[static_cast<std::size_t>(k)][static_cast<std::size_t>(r) - 1]
                                     : chart.zero_;
      next.push_back((chart.alpha_ * (up.partial(Var::x()) + left)).canonical());
    }
  }

  // inverse coefficients: triangular inverse in x, then reexpressed in xbar
  std::vector<std::vector<QFunction>> inv(static_cast<std::size_t>(max_order) + 1);
  for (int k = 0; k <= max_order; ++k) {
    inv[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(k) + 1, QFunction(0));
  }
  for (int r = 0; r <= max_order; ++r) {
    inv[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] =
        (QFunction(1) / chart.a_[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)])
            .canonical();
    for (int k = r + 1; k <= max_order; ++k) {
      QFunction acc = 0;
      for (int j = r; j < k; ++j)
        acc = acc + chart.a_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] *
                        inv[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
      inv[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)] =
          (-acc / chart.a_[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)]).canonical();
    }
  }
  chart.abar_.assign(static_cast<std::size_t>(max_order) + 1, {});
  std::map<Var, QFunction> to_xbar{{Var::x(), chart.delta_}};
  for (int k = 0; k <= max_order; ++k) {
    for (int r = 0; r <= k; ++r) {
      chart.abar_[static_cast<std::size_t>(k)].push_back(
          inv[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)].substitute(to_xbar));
    }
  }
  return chart;
}

const QFunction& ChartMap::coeff(int k, int r) const {
  if (k < 0 || k > max_order_ || r < 0 || r > k) return zero_;
  return a_[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)];
}

const QFunction& ChartMap::inverse_coeff(int k, int r) const {
  if (k < 0 || k > max_order_ || r < 0 || r > k) return zero_;
  return abar_[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)];
}

QFunction jet_transport(const ChartMap& chart, int k) {
  if (k < 0 || k > chart.max_order())
    throw DomainError("jet_transport order exceeds the chart coefficient table");
  QFunction acc = 0;
  for (int r = 0; r <= k; ++r) acc = acc + chart.coeff(k, r) * QFunction::q(r);
  return acc.canonical();
}

QFunction pull_back(const ChartMap& chart, const QFunction& f_bar) {
  require_no_opaque(f_bar, "pull_back");
  int mq = detail::max_jet_index(QFunctionAccess::canon(f_bar));
  int mp = detail::max_pjet_index(QFunctionAccess::canon(f_bar));
  if (mq > chart.max_order() || mp > chart.max_order())
    throw DomainError("pull_back: expression order exceeds the chart coefficient table");
  std::map<Var, QFunction> sub{{Var::x(), chart.gamma()}};
  for (int k = 0; k <= mq; ++k) sub.emplace(Var::q(k), jet_transport(chart, k));
  for (int k = 0; k <= mp; ++k) {
    QFunction acc = 0;
    for (int r = 0; r <= k; ++r) acc = acc + chart.coeff(k, r) * QFunction::p(r);
    sub.emplace(Var::p(k), acc.canonical());
  }
  return f_bar.substitute(sub).canonical();
}

QFunction push_forward(const ChartMap& chart, const QFunction& f) {
  require_no_opaque(f, "push_forward");
  int mq = detail::max_jet_index(QFunctionAccess::canon(f));
  int mp = detail::max_pjet_index(QFunctionAccess::canon(f));
  if (mq > chart.max_order() || mp > chart.max_order())
    throw DomainError("push_forward: expression order exceeds the chart coefficient table");
  std::map<Var, QFunction> sub{{Var::x(), chart.delta()}};
  for (int r = 0; r <= mq; ++r) {
    QFunction acc = 0;
    for (int k = 0; k <= r; ++k) acc = acc + chart.inverse_coeff(r, k) * QFunction::q(k);
    sub.emplace(Var::q(r), acc.canonical());
  }
  for (int r = 0; r <= mp; ++r) {
    QFunction acc = 0;
    for (int k = 0; k <= r; ++k) acc = acc + chart.inverse_coeff(r, k) * QFunction::p(k);
    sub.emplace(Var::p(r), acc.canonical());
  }
  return f.substitute(sub).canonical();
}

QFunction transport_generator(const ChartMap& chart, const QFunction& phi_bar) {
  if (!ops::is_homogeneous(phi_bar, Rational(1)).zero)
    throw DomainError("transport_generator needs a 1-homogeneous generator");
  QFunction g = pull_back(chart, (phi_bar / QFunction::q(0)).canonical());
  return (QFunction::q(0) * g).canonical();
}

QFunction transport_boundary_condition(const ChartMap& chart, const QFunction& phi_bar) {
  QFunction db_bar = propriety::boundary_divergence_expr(phi_bar);
  return pull_back(chart, db_bar);
}

TransportReport verify_operator_transport(const ChartMap& chart, const QFunction& f_bar,
                                          std::uint64_t seed) {
  require_no_opaque(f_bar, "verify_operator_transport");
  TransportReport rep;

  QFunction f = pull_back(chart, f_bar);
  QFunction dbar = ops::D(f_bar);
  QFunction df = ops::D(f);

  rep.d_transport = equal_functions(pull_back(chart, dbar), (chart.alpha() * df).canonical());
  rep.l_transport = equal_functions(pull_back(chart, ops::L(f_bar)), ops::L(f));
  rep.ratio_d_transport = equal_functions(pull_back(chart, (dbar / QFunction::q(0)).canonical()),
                                          (df / QFunction::q(0)).canonical());

  // Theorem-12 contraction, checked numerically: the barred side applies the
  // boundary operators to alphabar * f_bar, with alphabar = alpha(delta(xbar)).
  QFunction alpha_bar = chart.alpha().substitute({{Var::x(), chart.delta()}});
  QFunction h_bar = (alpha_bar * f_bar).canonical();

  int m_base = f.order();
  int m_bar = std::max(f_bar.order(), h_bar.order());
  if (2 * std::max(m_base, m_bar) - 1 > chart.max_order())
    throw DomainError("verify_operator_transport: order too high for the coefficient table");

  QFunction lhs = 0;
  for (int r = 0; r < m_base; ++r) lhs = lhs + QFunction::p(r) * ops::B(r, f);
  lhs = lhs.canonical();
  QFunction rhs = 0;
  for (int k = 0; k < m_bar; ++k) rhs = rhs + QFunction::p(k) * ops::B(k, h_bar);
  rhs = rhs.canonical();

  int need_q = std::max({lhs.order(), rhs.order(), 0});
  int need_p = std::max({lhs.pjet_order(), rhs.pjet_order(), 0});
  int need = std::max(need_q, need_p);
  if (need > chart.max_order())
    throw DomainError("verify_operator_transport: order too high for the coefficient table");

  std::mt19937_64 rng(seed ^ 0x6a09e667f3bcc909ULL);
  std::uniform_real_distribution<double> coord(0.3, 2.2);
  rep.boundary_transport = true;
  int checked = 0;
  for (int i = 0; i < 40 && checked < 20; ++i) {
    JetPoint base;
    base.x = coord(rng);
    base.q.resize(static_cast<std::size_t>(need) + 1);
    base.p.resize(static_cast<std::size_t>(need) + 1);
    for (auto& v : base.q) v = coord(rng);
    for (auto& v : base.p) v = coord(rng);
    try {
      JetPoint barred;
      barred.x = chart.gamma().evaluate({base.x, {}, {}});
      barred.q.resize(base.q.size());
      barred.p.resize(base.p.size());
      for (int k = 0; k <= need; ++k) {
        double qk = 0, pk = 0;
        for (int r = 0; r <= k; ++r) {
          double a = chart.coeff(k, r).evaluate({base.x, {}, {}});
          qk += a * base.q[static_cast<std::size_t>(r)];
          pk += a * base.p[static_cast<std::size_t>(r)];
        }
        barred.q[static_cast<std::size_t>(k)] = qk;
        barred.p[static_cast<std::size_t>(k)] = pk;
      }
      double vl = lhs.evaluate(base);
      double vr = rhs.evaluate(barred);
      double gap = std::abs(vl - vr) / (1.0 + std::abs(vl));
      rep.boundary_max_gap = std::max(rep.boundary_max_gap, gap);
      if (gap > 1e-7) rep.boundary_transport = false;
      ++checked;
    } catch (const EvalError&) {
      continue;
    }
  }
  if (checked == 0) rep.boundary_transport = false;
  rep.all_passed = rep.d_transport.zero && rep.l_transport.zero && rep.ratio_d_transport.zero &&
                   rep.boundary_transport;
  return rep;
}

}  // namespace localscore::charts
