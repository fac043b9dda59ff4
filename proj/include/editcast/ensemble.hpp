#pragma once

// Aggregating member predictions and bootstrap bagging.  The geometric rule
// averages in ln(1+p) space, the same space the RMSLE metric lives in.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "editcast/error.hpp"
#include "editcast/features.hpp"
#include "editcast/metrics.hpp"
#include "editcast/optim.hpp"
#include "editcast/parallel.hpp"
#include "editcast/random.hpp"

namespace editcast {

enum class AggregationKind { arithmetic, median, geometric };

inline constexpr std::string_view aggregation_name(AggregationKind k) {
  switch (k) {
    case AggregationKind::arithmetic: return "arithmetic";
    case AggregationKind::median: return "median";
    case AggregationKind::geometric: return "geometric";
  }
  return "?";
}

inline AggregationKind parse_aggregation(std::string_view name) {
  for (auto k : {AggregationKind::arithmetic, AggregationKind::median, AggregationKind::geometric})
    if (aggregation_name(k) == name) return k;
  throw ArgumentError("unknown aggregation rule '" + std::string(name) + "'");
}

struct AggregationRule {
  AggregationKind kind = AggregationKind::geometric;
  std::vector<double> weights;  // empty = equal weights

  void validate(std::size_t members) const {
    if (weights.empty()) return;
    detail::require(weights.size() == members, "aggregate: " + std::to_string(weights.size()) + " weights for " +
                                                   std::to_string(members) + " members");
    double s = 0.0;
    for (double w : weights) {
      detail::require(std::isfinite(w) && w >= 0.0, "aggregate: weights must be non-negative");
      s += w;
    }
    detail::require(std::abs(s - 1.0) <= 1e-12, "aggregate: weights must sum to 1");
  }
};

/// Combines one editor's member predictions.  Members are sorted (jointly
/// with their weights) before any summation, so the result does not depend
/// on member order, and the output is clamped to [min, max].
inline double aggregate(std::span<const double> members, const AggregationRule& rule) {
  if (members.empty()) throw ArgumentError("aggregate: no members");
  rule.validate(members.size());
  for (double v : members)
    if (!(v >= 0.0)) throw ArgumentError("aggregate: negative or NaN member prediction");

  const auto n = members.size();
  std::vector<std::pair<double, double>> mw(n);
  for (std::size_t i = 0; i < n; ++i) mw[i] = {members[i], rule.weights.empty() ? 1.0 / static_cast<double>(n) : rule.weights[i]};
  std::ranges::sort(mw);
  const double lo = mw.front().first;
  const double hi = mw.back().first;
  if (lo == hi) return lo;

  auto weighted_sum = [&](auto&& f) {
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) terms[i] = mw[i].second * f(mw[i].first);
    return detail::pairwise_sum(terms);
  };
  const double arith = std::clamp(weighted_sum([](double v) { return v; }), lo, hi);
  switch (rule.kind) {
    case AggregationKind::arithmetic: return arith;
    case AggregationKind::geometric: {
      const double g = std::expm1(weighted_sum([](double v) { return std::log1p(v); }));
      return std::min(std::clamp(g, lo, hi), arith);
    }
    case AggregationKind::median: {
      if (rule.weights.empty()) {
        return n % 2 == 1 ? mw[n / 2].first : mw[n / 2 - 1].first + (mw[n / 2].first - mw[n / 2 - 1].first) / 2.0;
      }
      double cum = 0.0;
      for (const auto& [v, w] : mw) {
        cum += w;
        if (cum >= 0.5) return v;
      }
      return hi;
    }
  }
  return arith;
}

inline double aggregate(const std::vector<double>& members, const AggregationRule& rule) {
  return aggregate(std::span<const double>(members), rule);
}

/// Row-wise aggregation of member prediction columns (one vector per member).
inline std::vector<double> aggregate_columns(const std::vector<std::vector<double>>& columns, const AggregationRule& rule) {
  if (columns.empty()) throw ArgumentError("aggregate: no members");
  const auto n = columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw ArgumentError("aggregate: member prediction counts differ");
  std::vector<double> out(n), row(columns.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < columns.size(); ++m) row[m] = clamp_prediction(columns[m][i]);
    out[i] = aggregate(row, rule);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap bagging

/// Row indices of replicate `r`: n draws with replacement.
inline std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t replicate) {
  auto rng = make_rng(seed, "bag.replicate", replicate);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return rows;
}

template <class Model>
struct Bag {
  std::vector<Model> members;
  AggregationRule rule;
};

using BaggedModel = Bag<FittedModel>;

/// Fits fit_fn(resample, replicate) on k bootstrap resamples.  A failing fit
/// aborts the bag with the lowest failing replicate index in the message.
template <class FitFn>
auto bootstrap_bag(const Dataset& data, int k, FitFn&& fit_fn, AggregationRule rule, std::uint64_t seed,
                   unsigned workers = 1) {
  using Model = std::decay_t<std::invoke_result_t<FitFn&, const Dataset&, std::size_t>>;
  if (data.empty()) throw ArgumentError("bootstrap_bag: empty dataset");
  if (k < 1) throw ArgumentError("bootstrap_bag: k must be >= 1");
  rule.validate(static_cast<std::size_t>(k));
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::optional<Model>> fitted(kk);
  std::vector<std::exception_ptr> errors(kk);
  parallel_for(kk, workers, [&](std::size_t r) {
    try {
      fitted[r].emplace(fit_fn(subset(data, bootstrap_rows(data.size(), seed, r)), r));
    } catch (...) {
      errors[r] = std::current_exception();
    }
  });
  for (std::size_t r = 0; r < kk; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const Error& e) {
      throw Error(e.code(), "bootstrap_bag: replicate " + std::to_string(r) + ": " + e.what());
    } catch (const std::exception& e) {
      throw NumericalError("bootstrap_bag: replicate " + std::to_string(r) + ": " + e.what());
    }
  }
  Bag<Model> bag;
  bag.rule = std::move(rule);
  for (auto& m : fitted) bag.members.push_back(std::move(*m));
  return bag;
}

template <class Model>
std::vector<double> predict_dataset(const Bag<Model>& bag, const Dataset& ds) {
  std::vector<std::vector<double>> cols;
  for (const auto& m : bag.members) cols.push_back(predict_dataset(m, ds));
  return aggregate_columns(cols, bag.rule);
}

inline bool training_objective_monotone(const BaggedModel& bag) {
  return std::ranges::all_of(bag.members, [](const FittedModel& m) { return training_objective_monotone(m); });
}

// ---------------------------------------------------------------------------
// Text formats

inline void write_rule(std::ostream& os, const AggregationRule& rule) {
  os << "rule " << aggregation_name(rule.kind) << "\n";
  if (!rule.weights.empty()) {
    os << "weights";
    for (double w : rule.weights) os << ' ' << io::format_double(w);
    os << "\n";
  }
}

inline void write_bag(std::ostream& os, const BaggedModel& bag) {
  os << "editcast-bag 1\nmembers " << bag.members.size() << "\nrule " << aggregation_name(bag.rule.kind)
     << "\nweights " << bag.rule.weights.size();
  for (double w : bag.rule.weights) os << ' ' << io::format_double(w);
  os << "\n";
  for (const auto& m : bag.members) write_model(os, m);
  os << "end\n";
}

inline BaggedModel read_bag(std::istream& is) {
  detail::expect(is, "editcast-bag");
  if (detail::read_value<int>(is, "version") != 1) throw IntegrityError("bag file: unsupported version");
  BaggedModel bag;
  detail::expect(is, "members");
  const auto k = detail::read_value<std::size_t>(is, "member count");
  if (k == 0) throw IntegrityError("bag file: no members");
  detail::expect(is, "rule");
  bag.rule.kind = parse_aggregation(detail::read_value<std::string>(is, "rule"));
  detail::expect(is, "weights");
  bag.rule.weights.resize(detail::read_value<std::size_t>(is, "weight count"));
  for (auto& w : bag.rule.weights) w = detail::read_double(is);
  try {
    bag.rule.validate(k);
  } catch (const ArgumentError& e) {
    throw IntegrityError(std::string("bag file: ") + e.what());
  }
  for (std::size_t i = 0; i < k; ++i) bag.members.push_back(read_model(is));
  detail::expect(is, "end");
  return bag;
}

/// Ensemble spec: a "rule NAME" line, an optional "weights w1 w2 ..." line
/// and one "member PATH" line per model.  '#' starts a comment.
struct EnsembleSpec {
  std::vector<std::string> members;
  AggregationRule rule;

  void validate() const {
    if (members.size() < 2) throw ArgumentError("ensemble: at least 2 members required");
    rule.validate(members.size());
  }
};

inline EnsembleSpec parse_ensemble_spec(std::string_view text) {
  EnsembleSpec spec;
  bool have_rule = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "rule") {
      std::string name;
      if (!(ls >> name)) throw ParseError(line_no, "rule needs a name");
      try {
        spec.rule.kind = parse_aggregation(name);
      } catch (const ArgumentError& e) {
        throw ParseError(line_no, e.what());
      }
      have_rule = true;
    } else if (key == "weights") {
      spec.rule.weights.clear();
      std::string w;
      while (ls >> w) {
        double v = 0.0;
        const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
        if (ec != std::errc{} || end != w.data() + w.size()) throw ParseError(line_no, "bad weight '" + w + "'");
        spec.rule.weights.push_back(v);
      }
    } else if (key == "member") {
      std::string rest;
      std::getline(ls >> std::ws, rest);
      while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.pop_back();
      if (rest.empty()) throw ParseError(line_no, "member needs a path");
      spec.members.push_back(rest);
    } else {
      throw ParseError(line_no, "unknown directive '" + key + "'");
    }
  }
  if (!have_rule) throw ArgumentError("ensemble spec: missing rule line");
  spec.validate();
  return spec;
}

inline std::string serialize_ensemble_spec(const EnsembleSpec& spec) {
  std::ostringstream os;
  write_rule(os, spec.rule);
  for (const auto& m : spec.members) os << "member " << m << "\n";
  return os.str();
}

struct Prediction {
  EditorId editor_id = 0;
  double value = 0.0;
};

inline std::string serialize_predictions(const Dataset& ds, std::span<const double> p) {
  if (p.size() != ds.size()) throw ArgumentError("predictions: count does not match dataset");
  std::string out = "editor_id\tprediction\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    out += std::to_string(ds.rows[i].editor_id);
    out += '\t';
    out += io::format_double(p[i]);
    out += '\n';
  }
  return out;
}

inline std::vector<Prediction> parse_predictions(std::string_view text) {
  std::vector<Prediction> out;
  detail::for_each_line(text, true, [&](std::string_view line, std::size_t line_no) {
    const auto f = detail::split_tabs(line);
    if (f.size() != 2) throw ParseError(line_no, "expected 2 fields, got " + std::to_string(f.size()));
    Prediction p;
    p.editor_id = detail::parse_int(f[0], line_no, "editor_id");
    double v = 0.0;
    const auto [end, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), v);
    if (ec != std::errc{} || end != f[1].data() + f[1].size() || !(v >= 0.0)) {
      throw ParseError(line_no, "bad prediction '" + std::string(f[1]) + "'");
    }
    p.value = v;
    out.push_back(p);
  });
  return out;
}

}  // namespace editcast
