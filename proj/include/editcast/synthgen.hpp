#pragma once

// Synthetic editor populations.
//
// Each editor gets a registration time, a cohort (registered within the last
// 12 months of the cutoff or earlier), and a latent scale X ~ Pareto(lambda,
// x_min), multiplied by old_rate_scale for the old cohort.  X is the expected
// number of edits in the 12 months before the cutoff.  Activity in month m
// after registration has intensity base * decay^m with the cohort's decay;
// a signup burst of signup_burst * base expected edits lands in the first day.
// `base` is solved so the expected 12-month pre-cutoff count equals X, which
// makes realised 12-month counts Pareto-tailed with exponent lambda above the
// largest cohort scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "editcast/editlog.hpp"
#include "editcast/error.hpp"
#include "editcast/parallel.hpp"
#include "editcast/random.hpp"

namespace editcast {

struct PopulationConfig {
  std::int64_t n_editors = 20000;
  Timestamp cutoff_ts = 1283299200;
  int history_months = 60;
  double frac_recent = 0.55;
  double tail_exponent = 2.51;
  double x_min = 1.0;
  double monthly_decay_old = 0.97;
  double monthly_decay_new = 0.90;
  double old_rate_scale = 8.0;
  double signup_burst = 2.0;
  double revert_prob = 0.05;
  int month_days = 30;
  int target_months = 5;
  std::uint64_t seed = 42;

  Timestamp month_len() const { return static_cast<Timestamp>(month_days) * kSecondsPerDay; }

  void validate() const {
    if (n_editors <= 0) throw ArgumentError("n_editors must be positive");
    detail::require(frac_recent > 0.0 && frac_recent < 1.0, "frac_recent must lie in (0, 1)");
    detail::require(tail_exponent > 1.0, "tail_exponent must exceed 1");
    detail::require(x_min > 0.0, "x_min must be positive");
    detail::require(monthly_decay_old > 0.0 && monthly_decay_old <= 1.0, "monthly_decay_old must lie in (0, 1]");
    detail::require(monthly_decay_new > 0.0 && monthly_decay_new <= 1.0, "monthly_decay_new must lie in (0, 1]");
    detail::require(old_rate_scale > 0.0, "old_rate_scale must be positive");
    detail::require(signup_burst >= 0.0, "signup_burst must be non-negative");
    detail::require(revert_prob >= 0.0 && revert_prob <= 1.0, "revert_prob must lie in [0, 1]");
    detail::require(history_months > 12, "history_months must exceed 12");
    detail::require(month_days > 0, "month_days must be positive");
    detail::require(target_months >= 1, "target_months must be >= 1");
    detail::require(cutoff_ts > static_cast<Timestamp>(history_months + 1) * month_len(),
                    "cutoff_ts too early for history_months");
  }
};

/// Parses a flat `key = value` file; '#' starts a comment.  Unknown keys and
/// unparsable values raise ConfigError naming the key.
inline PopulationConfig parse_population_config(std::string_view text, PopulationConfig cfg = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto as_double = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad value '" + value + "'");
      }
    };
    auto as_int = [&] {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad value '" + value + "'");
      }
    };
    if (key == "n_editors") cfg.n_editors = as_int();
    else if (key == "cutoff_ts") cfg.cutoff_ts = as_int();
    else if (key == "history_months") cfg.history_months = static_cast<int>(as_int());
    else if (key == "frac_recent") cfg.frac_recent = as_double();
    else if (key == "tail_exponent") cfg.tail_exponent = as_double();
    else if (key == "x_min") cfg.x_min = as_double();
    else if (key == "monthly_decay_old") cfg.monthly_decay_old = as_double();
    else if (key == "monthly_decay_new") cfg.monthly_decay_new = as_double();
    else if (key == "old_rate_scale") cfg.old_rate_scale = as_double();
    else if (key == "signup_burst") cfg.signup_burst = as_double();
    else if (key == "revert_prob") cfg.revert_prob = as_double();
    else if (key == "month_days") cfg.month_days = static_cast<int>(as_int());
    else if (key == "target_months") cfg.target_months = static_cast<int>(as_int());
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return cfg;
}

namespace detail {

inline double overlap(Timestamp a0, Timestamp a1, Timestamp b0, Timestamp b1) {
  return static_cast<double>(std::max<Timestamp>(0, std::min(a1, b1) - std::max(a0, b0)));
}

inline EditorHistory generate_editor(const PopulationConfig& cfg, EditorId id) {
  auto rng = make_rng(cfg.seed, "synthgen.editor", static_cast<std::uint64_t>(id));
  const Timestamp L = cfg.month_len();
  const bool recent = uniform01(rng) < cfg.frac_recent;
  const double age_months = recent ? 12.0 * uniform01(rng)
                                   : 12.0 + (cfg.history_months - 12.0) * uniform01(rng);
  EditorHistory h;
  h.editor_id = id;
  h.registration_ts = cfg.cutoff_ts - std::max<Timestamp>(1, std::llround(age_months * static_cast<double>(L)));

  const double scale = cfg.x_min * std::pow(1.0 - uniform01(rng), -1.0 / cfg.tail_exponent) *
                       (recent ? 1.0 : cfg.old_rate_scale);
  const double decay = recent ? cfg.monthly_decay_new : cfg.monthly_decay_old;

  const Timestamp year_lo = cfg.cutoff_ts - 12 * L;
  const Timestamp end = cfg.cutoff_ts + static_cast<Timestamp>(cfg.target_months) * L;
  const Timestamp burst_len = kSecondsPerDay;

  // expected mass in the 12 months before the cutoff, per unit of base rate
  double mass = 0.0;
  double w = 1.0;
  for (Timestamp m0 = h.registration_ts; m0 < cfg.cutoff_ts; m0 += L, w *= decay) {
    mass += w * overlap(m0, m0 + L, year_lo, cfg.cutoff_ts) / static_cast<double>(L);
  }
  if (h.registration_ts >= year_lo) mass += cfg.signup_burst;
  const double base = scale / mass;

  // a fraction of editors patrol; overall revert-action frequency is revert_prob
  const double patrol_frac = std::min(1.0, 4.0 * cfg.revert_prob);
  const bool patroller = patrol_frac > 0.0 && uniform01(rng) < patrol_frac;
  const double revert_action_prob = patroller ? cfg.revert_prob / patrol_frac : 0.0;

  std::vector<Timestamp> times;
  auto emit = [&](double mean, Timestamp lo, Timestamp len) {
    if (mean <= 0.0) return;
    const auto n = std::poisson_distribution<std::int64_t>(mean)(rng);
    for (std::int64_t k = 0; k < n; ++k) {
      times.push_back(lo + static_cast<Timestamp>(uniform01(rng) * static_cast<double>(len)));
    }
  };
  emit(cfg.signup_burst * base, h.registration_ts, burst_len);
  w = 1.0;
  for (Timestamp m0 = h.registration_ts; m0 < end; m0 += L, w *= decay) {
    const Timestamp len = std::min(L, end - m0);
    emit(base * w * static_cast<double>(len) / static_cast<double>(L), m0, len);
  }
  std::ranges::sort(times);

  h.edits.reserve(times.size());
  std::vector<ArticleId> articles;
  for (const Timestamp t : times) {
    EditRecord e;
    e.editor_id = id;
    e.timestamp = t;
    e.ns = uniform01(rng) < 0.85 ? 0 : 1 + static_cast<int>(uniform01(rng) * 3.0);
    if (!articles.empty() && uniform01(rng) < 0.5) {
      e.article_id = articles[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(articles.size()))];
    } else {
      e.article_id = 1 + static_cast<ArticleId>(uniform01(rng) * 5'000'000.0);
      articles.push_back(e.article_id);
    }
    const double size = std::exp(4.0 + 1.5 * std::normal_distribution<double>()(rng));
    e.delta_chars = (uniform01(rng) < 0.75 ? 1 : -1) * std::llround(size);
    e.has_comment = uniform01(rng) < 0.7;
    if (uniform01(rng) < cfg.revert_prob) {
      e.was_reverted = true;
      if (cfg.n_editors > 1) {
        auto other = 1 + static_cast<EditorId>(uniform01(rng) * static_cast<double>(cfg.n_editors - 1));
        if (other >= id) ++other;
        e.reverted_by = other;
      }
    }
    e.is_revert_action = uniform01(rng) < revert_action_prob;
    h.edits.push_back(e);
  }
  return h;
}

}  // namespace detail

/// Deterministic in `cfg` (seed included) and independent of `workers`.
inline std::vector<EditorHistory> generate(const PopulationConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  std::vector<EditorHistory> out(static_cast<std::size_t>(cfg.n_editors));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    out[i] = detail::generate_editor(cfg, static_cast<EditorId>(i + 1));
  });
  return out;
}

/// Keeps editors with at least one edit in [cutoff - 365 days, cutoff).
inline std::vector<EditorHistory> survivorship_filter(std::vector<EditorHistory> histories, const CutoffConfig& cfg) {
  const Timestamp lo = cfg.cutoff_ts - 365 * kSecondsPerDay;
  std::erase_if(histories, [&](const EditorHistory& h) {
    const auto it = std::ranges::lower_bound(h.edits, lo, {}, &EditRecord::timestamp);
    return it == h.edits.end() || it->timestamp >= cfg.cutoff_ts;
  });
  return histories;
}

/// Total edits per month over the last `months` months before the cutoff,
/// split into editors registered before (old) and after (new) cutoff - 365d.
/// Index 0 is the oldest month.
struct CohortMonthlyTotals {
  std::vector<double> old_editors;
  std::vector<double> new_editors;
  std::int64_t n_old = 0;
  std::int64_t n_new = 0;
};

inline CohortMonthlyTotals cohort_monthly_totals(std::span<const EditorHistory> histories, const CutoffConfig& cfg,
                                                 int months = 24) {
  CohortMonthlyTotals t;
  t.old_editors.assign(static_cast<std::size_t>(months), 0.0);
  t.new_editors.assign(static_cast<std::size_t>(months), 0.0);
  const Timestamp boundary = cfg.cutoff_ts - 365 * kSecondsPerDay;
  for (const auto& h : histories) {
    const bool old = h.registration_ts < boundary;
    (old ? t.n_old : t.n_new) += 1;
    auto& row = old ? t.old_editors : t.new_editors;
    for (int m = 0; m < months; ++m) {
      row[static_cast<std::size_t>(months - 1 - m)] += static_cast<double>(window_count(h, cfg, m, m + 1));
    }
  }
  return t;
}

}  // namespace editcast
