#pragma once

// The parametric model ladder: persistence, downscaled persistence, linear,
// log-log and linear-with-interaction models, each fitted per segment by
// minimising training RMSLE (closed-form least squares for log-log).

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "editcast/error.hpp"
#include "editcast/features.hpp"
#include "editcast/io.hpp"
#include "editcast/metrics.hpp"
#include "editcast/random.hpp"
#include "editcast/segments.hpp"

namespace editcast {

// ---------------------------------------------------------------------------
// Nelder-Mead

struct OptimizerConfig {
  int max_iters = 2000;
  double x_tol = 1e-8;
  double f_tol = 1e-10;
  int restarts = 3;
  double init_spread = 0.1;
  std::uint64_t seed = 0;
  bool zero_init = false;  // linear models: start from all-zero coefficients

  void validate() const {
    detail::require(max_iters >= 1, "max_iters must be >= 1");
    detail::require(x_tol > 0 && f_tol > 0, "optimizer tolerances must be positive");
    detail::require(restarts >= 1, "restarts must be >= 1");
    detail::require(init_spread > 0, "init_spread must be positive");
  }
};

struct OptimResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

namespace detail {

template <class F>
OptimResult nelder_mead_once(F& objective, const std::vector<double>& x0, double f0, std::span<const double> steps,
                             const OptimizerConfig& cfg, int& evals) {
  const std::size_t n = x0.size();
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };
  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fv(n + 1, f0);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += steps[i];
    fv[i + 1] = eval(simplex[i + 1]);
  }
  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  int iter = 0;
  for (;; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[n - 1];
    double diameter = 0.0;
    for (const auto& v : simplex)
      for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(v[j] - simplex[best][j]));
    if (iter >= cfg.max_iters || diameter < cfg.x_tol || fv[worst] - fv[best] < cfg.f_tol) {
      return {simplex[best], fv[best], iter, 0};
    }
    std::ranges::fill(centroid, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& v = simplex[order[k]];
      for (std::size_t j = 0; j < n; ++j) centroid[j] += v[j] / static_cast<double>(n);
    }
    const auto& xw = simplex[worst];
    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - xw[j]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (xr[j] - centroid[j]);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    for (std::size_t j = 0; j < n; ++j) {
      xc[j] = outside ? centroid[j] + 0.5 * (xr[j] - centroid[j]) : centroid[j] + 0.5 * (xw[j] - centroid[j]);
    }
    const double fc = eval(xc);
    if (outside ? fc <= fr : fc < fv[worst]) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    const auto xb = simplex[best];
    for (std::size_t k = 0; k <= n; ++k) {
      if (k == best) continue;
      for (std::size_t j = 0; j < n; ++j) simplex[k][j] = xb[j] + 0.5 * (simplex[k][j] - xb[j]);
      fv[k] = eval(simplex[k]);
    }
  }
}

}  // namespace detail

/// Nelder-Mead simplex minimisation (reflection 1, expansion 2, contraction
/// 0.5, shrink 0.5).  Each restart after the first rebuilds a fresh simplex
/// with randomly perturbed edge lengths around the best point found so far;
/// restarting stops early once a restart no longer improves by f_tol.
template <class F>
OptimResult nelder_mead(F&& objective, std::vector<double> x0, const OptimizerConfig& cfg) {
  cfg.validate();
  const double f0 = objective(x0);
  if (!std::isfinite(f0)) throw NumericalError("nelder_mead: objective is not finite at the initial point");
  int evals = 1;
  OptimResult best{x0, f0, 0, 0};
  if (x0.empty()) {
    best.evaluations = evals;
    return best;
  }
  auto rng = make_rng(cfg.seed, "nelder_mead");
  std::vector<double> steps(x0.size());
  for (int r = 0; r < cfg.restarts; ++r) {
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const double scale = cfg.init_spread * std::max(1.0, std::abs(best.x[j]));
      steps[j] = r == 0 ? scale : scale * (0.5 + uniform01(rng)) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
    }
    auto run = detail::nelder_mead_once(objective, best.x, best.f, steps, cfg, evals);
    const bool improved = run.f < best.f - cfg.f_tol;
    best.iterations += run.iterations;
    if (run.f < best.f) {
      best.x = std::move(run.x);
      best.f = run.f;
    }
    if (r > 0 && !improved) break;
  }
  best.evaluations = evals;
  return best;
}

// ---------------------------------------------------------------------------
// Model forms

enum class FormKind { persistence, downscaled_persistence, linear, log_log, linear_interaction };

inline constexpr std::string_view form_name(FormKind k) {
  switch (k) {
    case FormKind::persistence: return "persistence";
    case FormKind::downscaled_persistence: return "downscaled";
    case FormKind::linear: return "linear";
    case FormKind::log_log: return "loglog";
    case FormKind::linear_interaction: return "interaction";
  }
  return "persistence";
}

inline FormKind parse_form(std::string_view name) {
  for (auto k : {FormKind::persistence, FormKind::downscaled_persistence, FormKind::linear, FormKind::log_log,
                 FormKind::linear_interaction}) {
    if (form_name(k) == name) return k;
  }
  throw ArgumentError("unknown model form '" + std::string(name) + "'");
}

inline bool is_linear_kind(FormKind k) { return k == FormKind::linear || k == FormKind::linear_interaction; }

struct ModelForm {
  FormKind kind = FormKind::persistence;
  FeatureCatalog catalog;  // ignored (forced to {e_p}) for the persistence forms
  /// Optional per-cell feature subsets (names from `catalog`), one entry per
  /// cell of the scheme the model is fitted with.
  std::vector<std::vector<std::string>> cell_features;

  static ModelForm persistence() { return {FormKind::persistence, FeatureCatalog({"e_p"}), {}}; }
  static ModelForm downscaled() { return {FormKind::downscaled_persistence, FeatureCatalog({"e_p"}), {}}; }
  static ModelForm linear(FeatureCatalog c) { return {FormKind::linear, std::move(c), {}}; }
  static ModelForm log_log(FeatureCatalog c) { return {FormKind::log_log, std::move(c), {}}; }
  static ModelForm interaction(FeatureCatalog c) { return {FormKind::linear_interaction, std::move(c), {}}; }
};

struct SegmentFit {
  std::vector<std::size_t> active;  // indices into the model catalog
  std::vector<double> coeffs;       // intercept first for linear/log-log; alpha for downscaled
  std::int64_t n_train = 0;
  double initial_rmsle = 0.0;
  double train_rmsle = 0.0;
  int iterations = 0;
  bool fallback = false;
};

struct FittedModel {
  FormKind form = FormKind::persistence;
  SegmentScheme scheme = SegmentScheme::whole;
  FeatureCatalog catalog;
  std::vector<SegmentFit> segments;
  /// Stage-one model whose prediction is added before clamping (residual fits).
  std::shared_ptr<const FittedModel> offset;

  std::size_t parameter_count() const {
    std::size_t n = offset ? offset->parameter_count() : 0;
    for (const auto& s : segments) n += s.coeffs.size();
    return n;
  }
};

inline double clamp_prediction(double raw) {
  if (std::isnan(raw)) return 0.0;
  if (raw == std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::max();
  return std::max(0.0, raw);
}

namespace detail {

inline double raw_segment_output(FormKind form, const SegmentFit& s, std::span<const double> x) {
  switch (form) {
    case FormKind::persistence: return x[s.active.at(0)];
    case FormKind::downscaled_persistence: return s.coeffs[0] * x[s.active.at(0)];
    case FormKind::linear:
    case FormKind::linear_interaction:
    case FormKind::log_log: {
      double z = s.coeffs[0];
      for (std::size_t j = 0; j < s.active.size(); ++j) z += s.coeffs[j + 1] * x[s.active[j]];
      return form == FormKind::log_log ? std::expm1(z) : z;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Prediction for one editor; `features` are in model.catalog order.
inline double predict(const FittedModel& model, std::span<const double> features, const SegmentKey& key) {
  if (features.size() != model.catalog.size()) {
    throw ArgumentError("predict: catalog mismatch (expected " + std::to_string(model.catalog.size()) +
                        " features, got " + std::to_string(features.size()) + ")");
  }
  const auto cell = static_cast<std::size_t>(assign(key, model.scheme).cell);
  double raw = detail::raw_segment_output(model.form, model.segments.at(cell), features);
  if (model.offset) {
    const auto idx = column_map(model.offset->catalog, model.catalog);
    std::vector<double> sub(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) sub[j] = features[idx[j]];
    raw += predict(*model.offset, sub, key);
  }
  return clamp_prediction(raw);
}

/// Predictions for every row of a dataset whose catalog contains the model's.
inline std::vector<double> predict_dataset(const FittedModel& model, const Dataset& ds) {
  const auto idx = column_map(model.catalog, ds.catalog);
  std::vector<double> out(ds.size());
  std::vector<double> x(idx.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) x[j] = ds.rows[i].features[idx[j]];
    out[i] = predict(model, x, ds.rows[i].key);
  }
  return out;
}

inline std::vector<std::int64_t> targets(const Dataset& ds) {
  std::vector<std::int64_t> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds.rows[i].y;
  return y;
}

// ---------------------------------------------------------------------------
// Closed-form least squares

struct LeastSquaresResult {
  std::vector<double> beta;      // intercept first
  double gradient_norm = 0.0;    // ||X'(X b - z) + ridge b||_inf
};

/// Ridge-regularised normal equations (X'X + ridge I) b = X'z with an
/// intercept column prepended.  Two rounds of iterative refinement.
inline LeastSquaresResult least_squares(const std::vector<std::vector<double>>& rows, std::span<const double> z,
                                        double ridge = 1e-8) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size()) + 1;
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < k; ++j) X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)];
  }
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), n);
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = X.transpose() * zv;
  const auto ldlt = A.ldlt();
  if (ldlt.info() != Eigen::Success) throw NumericalError("least_squares: normal equations not solvable");
  Eigen::VectorXd b = ldlt.solve(rhs);
  for (int round = 0; round < 2; ++round) b += ldlt.solve(rhs - A * b);
  if (!b.allFinite()) throw NumericalError("least_squares: non-finite coefficients");
  const Eigen::VectorXd g = X.transpose() * (X * b - zv) + ridge * b;
  return {std::vector<double>(b.data(), b.data() + k), g.cwiseAbs().maxCoeff()};
}

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

/// Rows of one segment in model-catalog columns, with logs of targets.
struct SegmentData {
  std::vector<std::vector<double>> x;  // active columns only
  std::vector<double> log_y;
  std::vector<double> y;
  std::vector<double> offset;          // stage-one predictions (zeros if none)
};

inline double segment_rmsle(FormKind form, const std::vector<double>& coeffs, const SegmentData& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    double raw = 0.0;
    const auto& x = d.x[i];
    switch (form) {
      case FormKind::persistence: raw = x[0]; break;
      case FormKind::downscaled_persistence: raw = coeffs[0] * x[0]; break;
      default: {
        double z = coeffs[0];
        for (std::size_t j = 0; j < x.size(); ++j) z += coeffs[j + 1] * x[j];
        raw = form == FormKind::log_log ? std::expm1(z) : z;
      }
    }
    const double p = clamp_prediction(raw + d.offset[i]);
    const double diff = std::log1p(p) - d.log_y[i];
    s += diff * diff;
  }
  return std::sqrt(s / static_cast<double>(d.x.size()));
}

inline std::size_t param_count(FormKind form, std::size_t n_active) {
  switch (form) {
    case FormKind::persistence: return 0;
    case FormKind::downscaled_persistence: return 1;
    default: return n_active + 1;
  }
}

/// Starting points for a linear fit, best (lowest training RMSLE) first.
inline std::vector<double> linear_start(const SegmentData& d, FormKind form, const OptimizerConfig& cfg) {
  const std::size_t k = d.x.empty() ? 0 : d.x.front().size();
  std::vector<std::vector<double>> candidates;
  candidates.emplace_back(k + 1, 0.0);
  if (!cfg.zero_init) {
    const bool has_offset = std::ranges::any_of(d.offset, [](double o) { return o != 0.0; });
    if (!has_offset) {
      std::vector<double> c(k + 1, 0.0);
      c[0] = optimal_constant(d.y);
      candidates.push_back(c);
      // log-log closed form on log1p(max(x, 0)), expanded around the feature
      // means to zero order (constant) and first order (slopes)
      std::vector<std::vector<double>> lx(d.x.size(), std::vector<double>(k));
      std::vector<double> mean(k, 0.0);
      for (std::size_t i = 0; i < d.x.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) {
          lx[i][j] = std::log1p(std::max(0.0, d.x[i][j]));
          mean[j] += std::max(0.0, d.x[i][j]) / static_cast<double>(d.x.size());
        }
      const auto ls = least_squares(lx, d.log_y);
      double z = ls.beta[0];
      for (std::size_t j = 0; j < k; ++j) z += ls.beta[j + 1] * std::log1p(mean[j]);
      const double level = std::expm1(z);
      std::vector<double> zero_order(k + 1, 0.0);
      zero_order[0] = std::expm1(ls.beta[0]);
      candidates.push_back(zero_order);
      std::vector<double> first_order(k + 1, 0.0);
      first_order[0] = level;
      for (std::size_t j = 0; j < k; ++j) {
        first_order[j + 1] = (1.0 + level) * ls.beta[j + 1] / (1.0 + mean[j]);
        first_order[0] -= first_order[j + 1] * mean[j];
      }
      if (std::ranges::all_of(first_order, [](double v) { return std::isfinite(v); })) candidates.push_back(first_order);
    }
  }
  std::size_t best = 0;
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double f = segment_rmsle(form, candidates[c], d);
    if (f < best_f) {
      best_f = f;
      best = c;
    }
  }
  return candidates[best];
}

inline SegmentFit fit_segment(FormKind form, const SegmentData& d, std::vector<std::size_t> active,
                              const OptimizerConfig& cfg, std::uint64_t stream) {
  SegmentFit fit;
  fit.active = std::move(active);
  fit.n_train = static_cast<std::int64_t>(d.x.size());
  const std::size_t k = fit.active.size();
  switch (form) {
    case FormKind::persistence:
      fit.initial_rmsle = fit.train_rmsle = segment_rmsle(form, {}, d);
      return fit;
    case FormKind::log_log: {
      const auto ls = least_squares(d.x, d.log_y);
      std::vector<double> intercept_only(k + 1, 0.0);
      intercept_only[0] = std::log(1.0 + optimal_constant(d.y));
      fit.initial_rmsle = segment_rmsle(form, intercept_only, d);
      fit.coeffs = ls.beta;
      fit.train_rmsle = segment_rmsle(form, fit.coeffs, d);
      return fit;
    }
    case FormKind::downscaled_persistence: {
      std::vector<double> x0 = {1.0};
      fit.initial_rmsle = segment_rmsle(form, x0, d);
      auto oc = cfg;
      oc.seed = derive_seed(cfg.seed, "fit.segment", stream);
      const auto r = nelder_mead([&](const std::vector<double>& a) { return segment_rmsle(form, a, d); }, x0, oc);
      fit.coeffs = r.x;
      // counts are non-negative, so every alpha <= 0 predicts 0; report 0
      if (fit.coeffs[0] < 0.0) fit.coeffs[0] = 0.0;
      fit.train_rmsle = segment_rmsle(form, fit.coeffs, d);
      fit.iterations = r.iterations;
      return fit;
    }
    case FormKind::linear:
    case FormKind::linear_interaction: {
      const auto start = linear_start(d, form, cfg);
      fit.initial_rmsle = segment_rmsle(form, start, d);
      // optimise in units where every column has unit RMS
      std::vector<double> scale(k + 1, 1.0);
      for (std::size_t j = 0; j < k; ++j) {
        double ss = 0.0;
        for (const auto& row : d.x) ss += row[j] * row[j];
        const double rms = std::sqrt(ss / static_cast<double>(d.x.size()));
        scale[j + 1] = rms > 0.0 ? rms : 1.0;
      }
      std::vector<double> theta0(k + 1);
      for (std::size_t j = 0; j <= k; ++j) theta0[j] = start[j] * scale[j];
      std::vector<double> beta(k + 1);
      auto objective = [&](const std::vector<double>& theta) {
        for (std::size_t j = 0; j <= k; ++j) beta[j] = theta[j] / scale[j];
        return segment_rmsle(form, beta, d);
      };
      auto oc = cfg;
      oc.seed = derive_seed(cfg.seed, "fit.segment", stream);
      const auto r = nelder_mead(objective, theta0, oc);
      fit.coeffs.resize(k + 1);
      for (std::size_t j = 0; j <= k; ++j) fit.coeffs[j] = r.x[j] / scale[j];
      fit.train_rmsle = segment_rmsle(form, fit.coeffs, d);
      if (fit.train_rmsle > fit.initial_rmsle) {  // unscaling round-off; keep the start
        fit.coeffs = start;
        fit.train_rmsle = fit.initial_rmsle;
      }
      fit.iterations = r.iterations;
      return fit;
    }
  }
  return fit;
}

}  // namespace detail

/// Fits `form` independently in each cell of `scheme`.  Cells with fewer than
/// max(10, 2 * parameters) rows reuse coefficients fitted on all rows.
/// `offset`, when given, is a fitted stage-one model added to this model's
/// raw output before clamping.
inline FittedModel fit(const Dataset& data, const ModelForm& form, SegmentScheme scheme, const OptimizerConfig& cfg,
                       std::shared_ptr<const FittedModel> offset = nullptr) {
  if (data.empty()) throw ArgumentError("fit: empty dataset");
  cfg.validate();
  FittedModel model;
  model.form = form.kind;
  model.scheme = scheme;
  model.catalog = form.kind == FormKind::persistence || form.kind == FormKind::downscaled_persistence
                      ? FeatureCatalog({"e_p"})
                      : form.catalog;
  if (model.catalog.empty() && form.kind != FormKind::persistence) {
    throw ArgumentError("fit: parametric forms need a nonempty catalog");
  }
  if (offset && !is_linear_kind(form.kind)) throw ArgumentError("fit: an offset model requires a linear form");
  const auto own_features = model.catalog.size();
  if (offset) {
    // the stored catalog also carries the offset model's inputs; own features come first
    const std::vector<FeatureCatalog> both{model.catalog, offset->catalog};
    model.catalog = catalog_union(both);
  }
  model.offset = offset;
  const auto cols = column_map(model.catalog, data.catalog);
  const int cells = cell_count(scheme);
  if (!form.cell_features.empty() && static_cast<int>(form.cell_features.size()) != cells) {
    throw ArgumentError("fit: cell_features has " + std::to_string(form.cell_features.size()) + " entries, scheme " +
                        std::string(scheme_name(scheme)) + " has " + std::to_string(cells) + " cells");
  }
  std::vector<std::vector<std::size_t>> cell_active(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) {
    auto& act = cell_active[static_cast<std::size_t>(c)];
    if (form.cell_features.empty()) {
      act.resize(own_features);
      std::iota(act.begin(), act.end(), 0);
    } else {
      for (const auto& n : form.cell_features[static_cast<std::size_t>(c)]) {
        const auto i = model.catalog.index_of(n);
        if (i == FeatureCatalog::npos) throw ArgumentError("fit: cell feature '" + n + "' not in catalog");
        act.push_back(i);
      }
    }
  }

  std::vector<double> offsets(data.size(), 0.0);
  if (offset) offsets = predict_dataset(*offset, data);

  std::vector<int> row_cell(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) row_cell[i] = assign(data.rows[i].key, scheme).cell;

  auto gather = [&](const std::vector<std::size_t>& active, int cell) {
    detail::SegmentData d;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (cell >= 0 && row_cell[i] != cell) continue;
      const auto& r = data.rows[i];
      std::vector<double> x(active.size());
      for (std::size_t j = 0; j < active.size(); ++j) x[j] = r.features[cols[active[j]]];
      d.x.push_back(std::move(x));
      d.y.push_back(static_cast<double>(r.y));
      d.log_y.push_back(std::log1p(static_cast<double>(r.y)));
      d.offset.push_back(offsets[i]);
    }
    return d;
  };

  std::map<std::vector<std::size_t>, SegmentFit> whole_fits;
  model.segments.resize(static_cast<std::size_t>(cells));
  for (int c = 0; c < cells; ++c) {
    const auto& active = cell_active[static_cast<std::size_t>(c)];
    const auto needed = std::max<std::size_t>(10, 2 * detail::param_count(form.kind, active.size()));
    auto d = gather(active, c);
    if (d.x.size() >= needed) {
      model.segments[static_cast<std::size_t>(c)] =
          detail::fit_segment(form.kind, d, active, cfg, static_cast<std::uint64_t>(c));
      continue;
    }
    auto it = whole_fits.find(active);
    if (it == whole_fits.end()) {
      it = whole_fits.emplace(active, detail::fit_segment(form.kind, gather(active, -1), active, cfg, 1000)).first;
    }
    auto seg = it->second;
    seg.fallback = true;
    seg.n_train = static_cast<std::int64_t>(d.x.size());
    if (!d.x.empty()) {
      seg.initial_rmsle = seg.train_rmsle = detail::segment_rmsle(form.kind, seg.coeffs, d);
    }
    model.segments[static_cast<std::size_t>(c)] = std::move(seg);
  }
  return model;
}

/// True when no segment ended with a higher training RMSLE than its start.
inline bool training_objective_monotone(const FittedModel& m) {
  for (const auto& s : m.segments)
    if (!s.fallback && s.train_rmsle > s.initial_rmsle) return false;
  return !m.offset || training_objective_monotone(*m.offset);
}

// ---------------------------------------------------------------------------
// Forward selection

struct ForwardSelection {
  FeatureCatalog selected;
  std::vector<double> validation_rmsle;  // [0] = intercept-only, then one per added feature
  double last_gain = 0.0;                // gain of the best candidate in the final round
};

inline ForwardSelection forward_select(const Dataset& train, const Dataset& validation, const FeatureCatalog& candidates,
                                       FormKind form, SegmentScheme scheme, const OptimizerConfig& cfg,
                                       double min_gain = 1e-4) {
  detail::require(!candidates.empty(), "forward_select: no candidates");
  detail::require(!train.empty() && !validation.empty(), "forward_select: empty split");
  const auto y_valid = targets(validation);

  // intercept-only baseline: per-cell best constant
  std::vector<std::vector<std::int64_t>> cell_y(static_cast<std::size_t>(cell_count(scheme)));
  for (const auto& r : train.rows) cell_y[static_cast<std::size_t>(assign(r.key, scheme).cell)].push_back(r.y);
  const double global = optimal_constant(targets(train));
  std::vector<double> base_pred(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const auto& ys = cell_y[static_cast<std::size_t>(assign(validation.rows[i].key, scheme).cell)];
    base_pred[i] = ys.empty() ? global : optimal_constant(ys);
  }

  ForwardSelection out;
  double current = rmsle(base_pred, y_valid).epsilon;
  out.validation_rmsle.push_back(current);
  std::vector<std::string> chosen;
  std::vector<bool> used(candidates.size(), false);
  while (true) {
    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best = FeatureCatalog::npos;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      auto names = chosen;
      names.push_back(candidates[c]);
      const auto model = fit(train, ModelForm{form, FeatureCatalog(names), {}}, scheme, cfg);
      const double score = rmsle(predict_dataset(model, validation), y_valid).epsilon;
      if (score < best_score) {  // strict: ties keep the earlier candidate
        best_score = score;
        best = c;
      }
    }
    if (best == FeatureCatalog::npos) break;
    out.last_gain = current - best_score;
    if (out.last_gain < min_gain) break;
    used[best] = true;
    chosen.push_back(candidates[best]);
    current = best_score;
    out.validation_rmsle.push_back(current);
  }
  out.selected = FeatureCatalog(chosen);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization:  versioned whitespace-separated text, 17 significant digits.

inline void write_model(std::ostream& os, const FittedModel& m) {
  os << "editcast-model 1\n";
  os << "form " << form_name(m.form) << "\n";
  os << "scheme " << scheme_name(m.scheme) << "\n";
  os << "catalog " << m.catalog.size();
  for (const auto& n : m.catalog.names()) os << ' ' << n;
  os << "\nsegments " << m.segments.size() << "\n";
  for (const auto& s : m.segments) {
    os << "segment n " << s.n_train << " fallback " << (s.fallback ? 1 : 0) << " iterations " << s.iterations
       << " initial " << io::format_double(s.initial_rmsle) << " train " << io::format_double(s.train_rmsle)
       << " active " << s.active.size();
    for (auto a : s.active) os << ' ' << a;
    os << " coeffs " << s.coeffs.size();
    for (double c : s.coeffs) os << ' ' << io::format_double(c);
    os << "\n";
  }
  os << "offset " << (m.offset ? 1 : 0) << "\n";
  if (m.offset) write_model(os, *m.offset);
  os << "end\n";
}

inline std::string serialize_model(const FittedModel& m) {
  std::ostringstream os;
  write_model(os, m);
  return os.str();
}

namespace detail {

inline void expect(std::istream& is, std::string_view word) {
  std::string tok;
  if (!(is >> tok) || tok != word) {
    throw IntegrityError("model file: expected '" + std::string(word) + "', got '" + tok + "'");
  }
}

template <class T>
T read_value(std::istream& is, std::string_view what) {
  T v{};
  if (!(is >> v)) throw IntegrityError("model file: bad " + std::string(what));
  return v;
}

inline double read_double(std::istream& is) {
  const auto tok = read_value<std::string>(is, "number");
  double v = 0.0;
  const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || end != tok.data() + tok.size()) {
    throw IntegrityError("model file: bad number '" + tok + "'");
  }
  return v;
}

}  // namespace detail

inline FittedModel read_model(std::istream& is) {
  detail::expect(is, "editcast-model");
  if (detail::read_value<int>(is, "version") != 1) throw IntegrityError("model file: unsupported version");
  FittedModel m;
  detail::expect(is, "form");
  m.form = parse_form(detail::read_value<std::string>(is, "form"));
  detail::expect(is, "scheme");
  m.scheme = parse_scheme(detail::read_value<std::string>(is, "scheme"));
  detail::expect(is, "catalog");
  const auto nc = detail::read_value<std::size_t>(is, "catalog size");
  std::vector<std::string> names(nc);
  for (auto& n : names) n = detail::read_value<std::string>(is, "feature name");
  m.catalog = FeatureCatalog(std::move(names));
  detail::expect(is, "segments");
  const auto ns = detail::read_value<std::size_t>(is, "segment count");
  if (static_cast<int>(ns) != cell_count(m.scheme)) throw IntegrityError("model file: segment count does not match scheme");
  m.segments.resize(ns);
  for (auto& s : m.segments) {
    detail::expect(is, "segment");
    detail::expect(is, "n");
    s.n_train = detail::read_value<std::int64_t>(is, "n");
    detail::expect(is, "fallback");
    s.fallback = detail::read_value<int>(is, "fallback") != 0;
    detail::expect(is, "iterations");
    s.iterations = detail::read_value<int>(is, "iterations");
    detail::expect(is, "initial");
    s.initial_rmsle = detail::read_double(is);
    detail::expect(is, "train");
    s.train_rmsle = detail::read_double(is);
    detail::expect(is, "active");
    s.active.resize(detail::read_value<std::size_t>(is, "active count"));
    for (auto& a : s.active) {
      a = detail::read_value<std::size_t>(is, "active index");
      if (a >= m.catalog.size()) throw IntegrityError("model file: active index out of range");
    }
    detail::expect(is, "coeffs");
    s.coeffs.resize(detail::read_value<std::size_t>(is, "coeff count"));
    for (auto& c : s.coeffs) c = detail::read_double(is);
    if (s.coeffs.size() != detail::param_count(m.form, s.active.size())) {
      throw IntegrityError("model file: coefficient count does not match form");
    }
  }
  detail::expect(is, "offset");
  if (detail::read_value<int>(is, "offset flag") != 0) m.offset = std::make_shared<const FittedModel>(read_model(is));
  detail::expect(is, "end");
  return m;
}

inline FittedModel parse_model(const std::string& text) {
  std::istringstream is(text);
  return read_model(is);
}

}  // namespace editcast
