#include "localscore/density.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>

#include "quadrature.hpp"

namespace localscore {

struct DensitySpec::Cache {
  std::mutex mu;
  std::vector<QFunction> ratio;         // ratio[j] = p^(j)/p
  QFunction lprime;
  std::optional<double> log_norm;
  std::optional<std::pair<double, double>> support;
};

DensitySpec::DensitySpec(QFunction logdensity, double lo, double hi, Bindings bindings,
                         int jet_order_hint)
    : logdensity_(std::move(logdensity)),
      lo_(lo),
      hi_(hi),
      bindings_(std::move(bindings)),
      cache_(std::make_shared<Cache>()) {
  if (!(lo_ < hi_)) throw DomainError("density domain must be a nonempty open interval");
  if (logdensity_.order() != kOrderQFree || logdensity_.pjet_order() != kOrderQFree)
    throw DomainError("a log-density is an expression in x only (no jet symbols)");
  cache_->lprime = logdensity_.partial(Var::x());
  cache_->ratio.push_back(QFunction(1));
  for (int j = 0; j < std::max(jet_order_hint, 0); ++j) {
    const QFunction& r = cache_->ratio.back();
    cache_->ratio.push_back((r.partial(Var::x()) + cache_->lprime * r).canonical());
  }
}

const QFunction& DensitySpec::ratio_expr(int j) const {
  std::lock_guard<std::mutex> lk(cache_->mu);
  while (static_cast<int>(cache_->ratio.size()) <= j) {
    const QFunction& r = cache_->ratio.back();
    cache_->ratio.push_back((r.partial(Var::x()) + cache_->lprime * r).canonical());
  }
  return cache_->ratio[static_cast<std::size_t>(j)];
}

double DensitySpec::logdensity_at(double x) const {
  JetPoint pt;
  pt.x = x;
  return logdensity_.evaluate(pt, bindings_);
}

double DensitySpec::density_raw(double x) const {
  try {
    return std::exp(logdensity_at(x));
  } catch (const EvalError&) {
    return 0.0;  // singular log-density means the density vanishes there
  }
}

double DensitySpec::density(double x) const {
  double lz = log_norm();
  try {
    return std::exp(logdensity_at(x) - lz);
  } catch (const EvalError&) {
    return 0.0;
  }
}

std::vector<double> DensitySpec::ratios(double x, int M) const {
  ratio_expr(std::max(M, 0));  // ensure table depth
  std::vector<double> out(static_cast<std::size_t>(std::max(M, 0)) + 1);
  JetPoint pt;
  pt.x = x;
  for (int j = 0; j <= M; ++j) out[static_cast<std::size_t>(j)] = ratio_expr(j).evaluate(pt, bindings_);
  return out;
}

std::vector<double> DensitySpec::jets(double x, int M) const {
  std::vector<double> out = ratios(x, M);
  double p0 = density(x);
  for (auto& v : out) v *= p0;
  return out;
}

std::vector<double> DensitySpec::jets_raw(double x, int M) const {
  std::vector<double> out = ratios(x, M);
  double p0 = density_raw(x);
  for (auto& v : out) v *= p0;
  return out;
}

std::pair<double, double> DensitySpec::support() const {
  {
    std::lock_guard<std::mutex> lk(cache_->mu);
    if (cache_->support) return *cache_->support;
  }
  const double thr_ratio = 1e-12;
  auto dens = [this](double x) { return density_raw(x); };

  double wlo, whi;
  if (std::isfinite(lo_) && std::isfinite(hi_)) {
    wlo = lo_;
    whi = hi_;
  } else if (std::isfinite(lo_)) {
    wlo = lo_;
    whi = lo_ + 2.0;
  } else if (std::isfinite(hi_)) {
    whi = hi_;
    wlo = hi_ - 2.0;
  } else {
    wlo = -1.0;
    whi = 1.0;
  }

  auto grid_max = [&dens](double a, double b, int n) {
    double m = 0.0, xm = a;
    for (int i = 0; i <= n; ++i) {
      double x = a + (b - a) * i / n;
      double d = dens(x);
      if (d > m) {
        m = d;
        xm = x;
      }
    }
    return std::make_pair(m, xm);
  };

  // Expand infinite ends until the tail falls below threshold.
  for (int it = 0; it < 80; ++it) {
    auto [m, xm] = grid_max(wlo, whi, 256);
    (void)xm;
    if (m <= 0.0) {
      // nothing found yet: widen aggressively
      double w = whi - wlo;
      if (!std::isfinite(lo_)) wlo -= w;
      if (!std::isfinite(hi_)) whi += w;
      continue;
    }
    bool grow = false;
    double w = whi - wlo;
    if (!std::isfinite(lo_) && dens(wlo) > thr_ratio * m && w < 1e9) {
      wlo -= w;
      grow = true;
    }
    if (!std::isfinite(hi_) && dens(whi) > thr_ratio * m && w < 1e9) {
      whi += w;
      grow = true;
    }
    if (!grow) break;
  }

  auto [m, xmax] = grid_max(wlo, whi, 1024);
  if (m <= 0.0) throw DomainError("density appears to vanish everywhere on its domain");
  double thr = thr_ratio * m;

  auto bisect = [&](double inside, double outside) {
    // dens(inside) >= thr; find the crossing toward `outside`
    if (dens(outside) >= thr) return outside;
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (inside + outside);
      if (dens(mid) >= thr)
        inside = mid;
      else
        outside = mid;
    }
    return inside;
  };

  double slo = bisect(xmax, wlo);
  double shi = bisect(xmax, whi);
  std::lock_guard<std::mutex> lk(cache_->mu);
  cache_->support = std::make_pair(slo, shi);
  return *cache_->support;
}

double DensitySpec::log_norm() const {
  {
    std::lock_guard<std::mutex> lk(cache_->mu);
    if (cache_->log_norm) return *cache_->log_norm;
  }
  auto [slo, shi] = support();
  auto z = detail::integrate([this](double x) { return density_raw(x); }, slo, shi, 1e-10);
  if (!(z.value > 0.0) || !std::isfinite(z.value))
    throw DomainError("density is not integrable on its domain");
  std::lock_guard<std::mutex> lk(cache_->mu);
  cache_->log_norm = std::log(z.value);
  return *cache_->log_norm;
}

}  // namespace localscore
