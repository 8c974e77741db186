#include "localscore/expr.hpp"

#include <cmath>
#include <mutex>
#include <random>

#include "qfunction_access.hpp"

namespace localscore {

using detail::Canon;
using detail::NodePtr;

namespace detail {

// Lazily computed canonical data shared by copies of a QFunction.
struct CanonCell {
  std::mutex mu;
  std::shared_ptr<const Canon> canon;
  std::optional<int> order;
  std::optional<int> porder;
};

}  // namespace detail

std::string Var::str() const {
  switch (kind_) {
    case Kind::X:
      return "x";
    case Kind::Jet:
      return "q" + std::to_string(index_);
    case Kind::PJet:
      return "p" + std::to_string(index_);
    case Kind::Param:
      return name_;
  }
  return "?";
}

QFunction::QFunction() : QFunction(detail::make_number(0)) {}
QFunction::QFunction(int value) : QFunction(detail::make_number(Rational(value))) {}
QFunction::QFunction(const Rational& value) : QFunction(detail::make_number(value)) {}

QFunction::QFunction(NodePtr root)
    : root_(std::move(root)), cell_(std::make_shared<detail::CanonCell>()) {}

QFunction QFunction::parse(std::string_view text) { return QFunction(detail::parse_text(text)); }
QFunction QFunction::number(const Rational& value) { return QFunction(detail::make_number(value)); }
QFunction QFunction::x() { return QFunction(detail::make_x()); }
QFunction QFunction::q(int j) {
  if (j < 0) throw Error("jet index must be nonnegative");
  return QFunction(detail::make_jet(j));
}
QFunction QFunction::p(int j) {
  if (j < 0) throw Error("jet index must be nonnegative");
  return QFunction(detail::make_pjet(j));
}
QFunction QFunction::param(std::string name) { return QFunction(detail::make_param(std::move(name))); }
QFunction QFunction::opaque(std::string name, int deriv_order) {
  return QFunction(detail::make_opaque(std::move(name), deriv_order));
}

const Canon& QFunctionAccess::canon(const QFunction& f) {
  auto& cell = *f.cell_;
  std::lock_guard<std::mutex> lk(cell.mu);
  if (!cell.canon) cell.canon = std::make_shared<Canon>(detail::canon_of_node(*f.root_));
  return *cell.canon;
}

QFunction QFunctionAccess::from_canon(Canon c) {
  QFunction f(detail::node_of_canon(c));
  f.cell_->canon = std::make_shared<Canon>(std::move(c));
  return f;
}

QFunction QFunctionAccess::from_node(NodePtr n) { return QFunction(std::move(n)); }

QFunction QFunction::canonical() const { return QFunctionAccess::from_canon(QFunctionAccess::canon(*this)); }

std::string QFunction::str() const { return detail::print_canon(QFunctionAccess::canon(*this)); }

namespace detail {

namespace {

constexpr double kZeroTol = 1e-9;
constexpr int kZeroPoints = 20;
constexpr int kZeroBatches = 5;
constexpr std::uint64_t kZeroSeed = 0x51a0c95ed02d71f3ULL;

// Coordinates from [0.1, 3] (q0 included), opaque symbols bound to
// c0 + c1*sin(c2*x + c3) whose derivatives never vanish identically.
SampleCtx random_ctx(std::mt19937_64& rng, int maxq, int maxp,
                     const std::set<std::string>& params, const std::set<std::string>& opaques) {
  std::uniform_real_distribution<double> coord(0.1, 3.0);
  SampleCtx ctx;
  ctx.point.x = coord(rng);
  ctx.point.q.resize(static_cast<std::size_t>(std::max(maxq, 0)) + 1);
  for (auto& v : ctx.point.q) v = coord(rng);
  if (maxp >= 0) {
    ctx.point.p.resize(static_cast<std::size_t>(maxp) + 1);
    for (auto& v : ctx.point.p) v = coord(rng);
  }
  for (const auto& name : params) ctx.bindings.params[name] = coord(rng);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> freq(0.7, 1.9);
  for (const auto& name : opaques) {
    double c0 = amp(rng), c1 = amp(rng), c2 = freq(rng), c3 = coord(rng);
    ctx.bindings.opaque[name] = [c0, c1, c2, c3](int order, double xx) {
      double v = c1 * std::pow(c2, order) *
                 std::sin(c2 * xx + c3 + order * 1.5707963267948966);
      return order == 0 ? c0 + v : v;
    };
  }
  return ctx;
}

}  // namespace

SampleCtx random_sample_for(const Canon& c, std::mt19937_64& rng) {
  std::set<std::string> params, opaques;
  collect_params(c, params);
  collect_opaques(c, opaques);
  return random_ctx(rng, max_jet_index(c), max_pjet_index(c), params, opaques);
}

ZeroCheck zero_check_canon(const Canon& c) {
  if (c.num.empty()) return {true, true};
  if (!has_inexact_atoms(c)) return {false, true};

  int maxq = max_jet_index(c);
  int maxp = max_pjet_index(c);
  std::set<std::string> params, opaques;
  collect_params(c, params);
  collect_opaques(c, opaques);

  for (int batch = 0; batch < kZeroBatches; ++batch) {
    std::mt19937_64 rng(kZeroSeed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(batch));
    bool singular = false;
    bool all_small = true;
    for (int i = 0; i < kZeroPoints && !singular; ++i) {
      SampleCtx ctx = random_ctx(rng, maxq, maxp, params, opaques);
      EvalCtx ec{&ctx.point, &ctx.bindings};
      try {
        double magnitude = 0.0;
        auto v = eval_canon(c, ec, &magnitude);
        if (std::abs(v) >= kZeroTol * (1.0 + magnitude)) return {false, false};
      } catch (const EvalError&) {
        singular = true;
      }
    }
    if (!singular && all_small) return {true, false};
  }
  throw EvalError("zero test hit evaluation singularities in every sample batch");
}

}  // namespace detail

ZeroCheck QFunction::is_zero() const { return detail::zero_check_canon(QFunctionAccess::canon(*this)); }

int QFunction::order() const {
  {
    std::lock_guard<std::mutex> lk(cell_->mu);
    if (cell_->order) return *cell_->order;
  }
  const Canon& c = QFunctionAccess::canon(*this);
  int result = kOrderQFree;
  for (int j = detail::max_jet_index(c); j >= 0; --j) {
    if (!detail::zero_check_canon(detail::c_partial(c, Var::q(j))).zero) {
      result = j;
      break;
    }
  }
  std::lock_guard<std::mutex> lk(cell_->mu);
  cell_->order = result;
  return result;
}

int QFunction::pjet_order() const {
  {
    std::lock_guard<std::mutex> lk(cell_->mu);
    if (cell_->porder) return *cell_->porder;
  }
  const Canon& c = QFunctionAccess::canon(*this);
  int result = kOrderQFree;
  for (int j = detail::max_pjet_index(c); j >= 0; --j) {
    if (!detail::zero_check_canon(detail::c_partial(c, Var::p(j))).zero) {
      result = j;
      break;
    }
  }
  std::lock_guard<std::mutex> lk(cell_->mu);
  cell_->porder = result;
  return result;
}

QFunction QFunction::partial(const Var& v) const {
  return QFunctionAccess::from_canon(detail::c_partial(QFunctionAccess::canon(*this), v));
}

QFunction QFunction::substitute(const std::map<Var, QFunction>& map) const {
  detail::SubstMap m;
  for (const auto& [var, target] : map) m.emplace(var, QFunctionAccess::canon(target));
  return QFunctionAccess::from_canon(detail::c_subst(QFunctionAccess::canon(*this), m));
}

double QFunction::evaluate(const JetPoint& point, const Bindings& bindings) const {
  detail::EvalCtx ctx{&point, &bindings};
  auto z = detail::eval_node(*root_, ctx);
  if (std::abs(z.imag()) > 1e-9 * (1.0 + std::abs(z.real())))
    throw EvalError("evaluation produced a complex value");
  return z.real();
}

QFunction operator+(const QFunction& a, const QFunction& b) {
  return QFunctionAccess::from_node(detail::make_add({a.root_, b.root_}));
}
QFunction operator-(const QFunction& a, const QFunction& b) {
  return QFunctionAccess::from_node(
      detail::make_add({a.root_, detail::make_mul({detail::make_number(-1), b.root_})}));
}
QFunction operator*(const QFunction& a, const QFunction& b) {
  return QFunctionAccess::from_node(detail::make_mul({a.root_, b.root_}));
}
QFunction operator/(const QFunction& a, const QFunction& b) {
  return QFunctionAccess::from_node(
      detail::make_mul({a.root_, detail::make_pow(b.root_, Rational(-1))}));
}
QFunction QFunction::operator-() const {
  return QFunctionAccess::from_node(detail::make_mul({detail::make_number(-1), root_}));
}

bool operator==(const QFunction& a, const QFunction& b) {
  return detail::compare(QFunctionAccess::canon(a), QFunctionAccess::canon(b)) == 0;
}

QFunction pow(const QFunction& base, const Rational& e) {
  return QFunctionAccess::from_node(detail::make_pow(base.root(), e));
}
QFunction ln(const QFunction& f) { return QFunctionAccess::from_node(detail::make_ln(f.root())); }
QFunction exp(const QFunction& f) { return QFunctionAccess::from_node(detail::make_exp(f.root())); }

ZeroCheck equal_functions(const QFunction& a, const QFunction& b) { return (a - b).is_zero(); }

}  // namespace localscore
