#pragma once

// RMSLE scoring, the best constant predictor under RMSLE, and power-law tail
// estimation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "editcast/error.hpp"

namespace editcast {

struct EvalResult {
  double epsilon = 0.0;
  std::int64_t n = 0;
};

namespace detail {

/// Pairwise summation: fixed reduction tree, so the result only depends on
/// the input order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const auto half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

template <class T>
void require_non_negative(std::span<const T> v, const char* what) {
  for (const auto& x : v) {
    if (!(x >= 0)) throw ArgumentError(std::string(what) + " must be non-negative");
  }
}

}  // namespace detail

/// sqrt(mean((ln(1+p) - ln(1+a))^2)).
template <class P, class A>
EvalResult rmsle(std::span<const P> predictions, std::span<const A> actuals) {
  if (predictions.size() != actuals.size()) throw ArgumentError("rmsle: length mismatch");
  if (predictions.empty()) throw ArgumentError("rmsle: empty input");
  detail::require_non_negative(predictions, "rmsle: predictions");
  detail::require_non_negative(actuals, "rmsle: actuals");
  std::vector<double> sq(predictions.size());
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double d = std::log1p(static_cast<double>(predictions[i])) - std::log1p(static_cast<double>(actuals[i]));
    sq[i] = d * d;
  }
  const auto n = static_cast<std::int64_t>(sq.size());
  return {std::sqrt(detail::pairwise_sum(sq) / static_cast<double>(n)), n};
}

inline EvalResult rmsle(const std::vector<double>& p, const std::vector<double>& a) {
  return rmsle(std::span<const double>(p), std::span<const double>(a));
}
inline EvalResult rmsle(const std::vector<double>& p, const std::vector<std::int64_t>& a) {
  return rmsle(std::span<const double>(p), std::span<const std::int64_t>(a));
}

/// The constant c minimising rmsle([c..c], a): geometric mean of (a+1), minus 1.
template <class A>
double optimal_constant(std::span<const A> actuals) {
  if (actuals.empty()) throw ArgumentError("optimal_constant: empty input");
  detail::require_non_negative(actuals, "optimal_constant: actuals");
  std::vector<double> logs(actuals.size());
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log1p(static_cast<double>(actuals[i]));
  return std::expm1(detail::pairwise_sum(logs) / static_cast<double>(logs.size()));
}

inline double optimal_constant(const std::vector<double>& a) { return optimal_constant(std::span<const double>(a)); }
inline double optimal_constant(const std::vector<std::int64_t>& a) {
  return optimal_constant(std::span<const std::int64_t>(a));
}

// ---------------------------------------------------------------------------
// Power-law tails, Pr(X > x) = (x / x_min)^-lambda.

struct ParetoFit {
  double lambda_hat = 0.0;
  double x_min = 0.0;
  std::int64_t n_tail = 0;
};

inline constexpr std::int64_t kMinTailSamples = 10;

/// Hill estimator over samples strictly above x_min:
/// lambda = n_tail / sum(ln(x_i / x_min)).
template <class T>
ParetoFit fit_pareto_tail(std::span<const T> samples, double x_min) {
  detail::require(x_min > 0.0, "fit_pareto_tail: x_min must be positive");
  std::vector<double> logs;
  for (const auto& x : samples) {
    const auto v = static_cast<double>(x);
    if (v > x_min) logs.push_back(std::log(v / x_min));
  }
  const auto n = static_cast<std::int64_t>(logs.size());
  if (n < kMinTailSamples) {
    throw InsufficientDataError("fit_pareto_tail: " + std::to_string(n) + " samples above x_min, need at least " +
                                std::to_string(kMinTailSamples));
  }
  return {static_cast<double>(n) / detail::pairwise_sum(logs), x_min, n};
}

template <class T>
ParetoFit fit_pareto_tail(const std::vector<T>& samples, double x_min) {
  return fit_pareto_tail(std::span<const T>(samples), x_min);
}

/// Empirical CCDF on log-log axes, one point per distinct value >= x_min.
struct CcdfPoint {
  double x = 0.0;
  double ccdf = 0.0;  // Pr(X >= x)
};

template <class T>
std::vector<CcdfPoint> empirical_ccdf(std::span<const T> samples, double x_min = 0.0) {
  std::vector<double> v;
  for (const auto& s : samples)
    if (static_cast<double>(s) >= x_min && static_cast<double>(s) > 0.0) v.push_back(static_cast<double>(s));
  std::ranges::sort(v);
  std::vector<CcdfPoint> out;
  const auto n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0 && v[i] == v[i - 1]) continue;
    out.push_back({v[i], static_cast<double>(v.size() - i) / n});
  }
  return out;
}

/// Least-squares slope of ln CCDF against ln x; lambda = -slope.  The
/// regression counterpart of the Hill estimator, mostly for plots.
struct CcdfFit {
  double lambda = 0.0;
  double intercept = 0.0;
  std::int64_t points = 0;
};

template <class T>
CcdfFit fit_ccdf_regression(std::span<const T> samples, double x_min) {
  const auto pts = empirical_ccdf(samples, x_min);
  if (static_cast<std::int64_t>(pts.size()) < 3) throw InsufficientDataError("fit_ccdf_regression: need >= 3 distinct values");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double lx = std::log(p.x);
    const double ly = std::log(p.ccdf);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(pts.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {-slope, (sy - slope * sx) / n, static_cast<std::int64_t>(pts.size())};
}

/// Tail threshold by minimum Kolmogorov-Smirnov distance between the
/// empirical tail and its Hill fit, over distinct sample values leaving at
/// least `min_tail` samples above them.
template <class T>
ParetoFit fit_pareto_tail_auto(std::span<const T> samples, std::int64_t min_tail = 100) {
  std::vector<double> v;
  for (const auto& s : samples)
    if (static_cast<double>(s) > 0.0) v.push_back(static_cast<double>(s));
  std::ranges::sort(v);
  ParetoFit best;
  double best_ks = 2.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0 && v[i] == v[i - 1]) continue;
    const double xm = v[i];
    const auto first_above = std::ranges::upper_bound(v, xm) - v.begin();
    const auto n_tail = static_cast<std::int64_t>(v.size()) - first_above;
    if (n_tail < std::max(min_tail, kMinTailSamples)) break;
    std::span<const double> tail(v.data() + first_above, static_cast<std::size_t>(n_tail));
    const auto fit = fit_pareto_tail(tail, xm);
    double ks = 0.0;
    for (std::size_t j = 0; j < tail.size(); ++j) {
      if (j + 1 < tail.size() && tail[j + 1] == tail[j]) continue;
      const double emp = static_cast<double>(j + 1) / static_cast<double>(tail.size());
      const double model = 1.0 - std::pow(tail[j] / xm, -fit.lambda_hat);
      ks = std::max(ks, std::abs(emp - model));
    }
    if (ks < best_ks) {
      best_ks = ks;
      best = fit;
    }
  }
  if (best.n_tail == 0) throw InsufficientDataError("fit_pareto_tail_auto: not enough tail samples");
  return best;
}

}  // namespace editcast
