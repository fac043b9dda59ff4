#pragma once

// Named predictors extracted from an editor history at a cutoff.
//
// Base names:
//   e_p, e_1, e_prev, d_p, d_prev, days_since_last_edit, age_days,
//   reverts_gotten_p, reverts_made_p, e_ns0_p, articles_p, comment_frac_p
//   edits_A_B, days_A_B, ns0_A_B, articles_A_B   (window of months [A, B))
// Derived names:
//   log1p(f)   for a base name f
//   f*g        for base names f and g

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iterator>
#include <optional>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "editcast/editlog.hpp"
#include "editcast/error.hpp"
#include "editcast/io.hpp"
#include "editcast/parallel.hpp"

namespace editcast {

class FeatureCatalog {
 public:
  FeatureCatalog() = default;
  explicit FeatureCatalog(std::vector<std::string> names);

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::string& operator[](std::size_t i) const { return names_[i]; }
  bool contains(std::string_view name) const { return index_of(name) != npos; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return npos;
  }

  friend bool operator==(const FeatureCatalog&, const FeatureCatalog&) = default;

 private:
  std::vector<std::string> names_;
};

using FeatureVector = std::vector<double>;

/// The two editor attributes every segmentation scheme looks at.
struct SegmentKey {
  double age_days = 0.0;
  std::int64_t d_p = 0;
};

struct TrainingExample {
  EditorId editor_id = 0;
  SegmentKey key;
  FeatureVector features;
  std::int64_t y = 0;  // edits in the forward target window
};

struct Dataset {
  FeatureCatalog catalog;
  std::vector<TrainingExample> rows;

  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
};

namespace detail {

enum class BaseKind {
  e_p, e_1, e_prev, d_p, d_prev, days_since_last_edit, age_days,
  reverts_gotten_p, reverts_made_p, e_ns0_p, articles_p, comment_frac_p,
  window_edits, window_days, window_ns0, window_articles,
};

struct BaseFeature {
  BaseKind kind{};
  int from = 0;
  int to = 0;
  friend auto operator<=>(const BaseFeature&, const BaseFeature&) = default;
};

inline const std::map<std::string, BaseKind, std::less<>>& named_bases() {
  static const std::map<std::string, BaseKind, std::less<>> m = {
      {"e_p", BaseKind::e_p},
      {"e_1", BaseKind::e_1},
      {"e_prev", BaseKind::e_prev},
      {"d_p", BaseKind::d_p},
      {"d_prev", BaseKind::d_prev},
      {"days_since_last_edit", BaseKind::days_since_last_edit},
      {"age_days", BaseKind::age_days},
      {"reverts_gotten_p", BaseKind::reverts_gotten_p},
      {"reverts_made_p", BaseKind::reverts_made_p},
      {"e_ns0_p", BaseKind::e_ns0_p},
      {"articles_p", BaseKind::articles_p},
      {"comment_frac_p", BaseKind::comment_frac_p},
  };
  return m;
}

inline std::optional<BaseFeature> parse_base(std::string_view name) {
  if (const auto it = named_bases().find(name); it != named_bases().end()) return BaseFeature{it->second, 0, 0};
  static constexpr std::pair<std::string_view, BaseKind> prefixes[] = {
      {"edits_", BaseKind::window_edits},
      {"days_", BaseKind::window_days},
      {"ns0_", BaseKind::window_ns0},
      {"articles_", BaseKind::window_articles},
  };
  for (const auto& [prefix, kind] : prefixes) {
    if (!name.starts_with(prefix)) continue;
    auto rest = name.substr(prefix.size());
    const auto us = rest.find('_');
    if (us == std::string_view::npos) return std::nullopt;
    int a = 0;
    int b = 0;
    const auto pa = std::from_chars(rest.data(), rest.data() + us, a);
    const auto pb = std::from_chars(rest.data() + us + 1, rest.data() + rest.size(), b);
    if (pa.ec != std::errc{} || pa.ptr != rest.data() + us) return std::nullopt;
    if (pb.ec != std::errc{} || pb.ptr != rest.data() + rest.size()) return std::nullopt;
    if (a < 0 || a >= b) return std::nullopt;
    return BaseFeature{kind, a, b};
  }
  return std::nullopt;
}

/// A catalog entry resolved to base-feature slots.
struct Term {
  enum class Op { identity, log1p, product } op = Op::identity;
  std::size_t a = 0;
  std::size_t b = 0;
};

struct CompiledCatalog {
  std::vector<BaseFeature> bases;
  std::vector<Term> terms;
};

inline CompiledCatalog compile(const std::vector<std::string>& names) {
  CompiledCatalog c;
  std::map<BaseFeature, std::size_t> slot;
  auto base_slot = [&](std::string_view base_name, std::string_view full) {
    const auto b = parse_base(base_name);
    if (!b) throw ArgumentError("feature '" + std::string(full) + "' references unknown base '" + std::string(base_name) + "'");
    const auto [it, inserted] = slot.emplace(*b, c.bases.size());
    if (inserted) c.bases.push_back(*b);
    return it->second;
  };
  for (const auto& n : names) {
    std::string_view name = n;
    Term t;
    if (name.starts_with("log1p(") && name.ends_with(")")) {
      t.op = Term::Op::log1p;
      t.a = base_slot(name.substr(6, name.size() - 7), name);
    } else if (const auto star = name.find('*'); star != std::string_view::npos) {
      t.op = Term::Op::product;
      t.a = base_slot(name.substr(0, star), name);
      t.b = base_slot(name.substr(star + 1), name);
    } else {
      t.a = base_slot(name, name);
    }
    c.terms.push_back(t);
  }
  return c;
}

inline double base_value(const BaseFeature& b, const EditorHistory& h, const CutoffConfig& cfg) {
  const int P = cfg.persistence_months;
  const auto age_days = std::max(0.0, static_cast<double>(cfg.cutoff_ts - h.registration_ts) / kSecondsPerDay);
  auto count_if = [&](int from, int to, auto pred) {
    double n = 0;
    for (const auto& e : edits_in_window(h, cfg, from, to)) n += pred(e) ? 1.0 : 0.0;
    return n;
  };
  auto distinct_articles = [&](int from, int to) {
    std::set<ArticleId> s;
    for (const auto& e : edits_in_window(h, cfg, from, to)) s.insert(e.article_id);
    return static_cast<double>(s.size());
  };
  switch (b.kind) {
    case BaseKind::e_p: return static_cast<double>(window_count(h, cfg, 0, P));
    case BaseKind::e_1: return static_cast<double>(window_count(h, cfg, 0, 1));
    case BaseKind::e_prev: return static_cast<double>(window_count(h, cfg, P, 2 * P));
    case BaseKind::d_p: return static_cast<double>(unique_edit_days(h, cfg, 0, P));
    case BaseKind::d_prev: return static_cast<double>(unique_edit_days(h, cfg, P, 2 * P));
    case BaseKind::days_since_last_edit: {
      const auto it = std::ranges::lower_bound(h.edits, cfg.cutoff_ts, {}, &EditRecord::timestamp);
      if (it == h.edits.begin()) return age_days;
      const double since = static_cast<double>(cfg.cutoff_ts - std::prev(it)->timestamp) / kSecondsPerDay;
      return std::min(since, age_days);
    }
    case BaseKind::age_days: return age_days;
    case BaseKind::reverts_gotten_p: return count_if(0, P, [](const EditRecord& e) { return e.was_reverted; });
    case BaseKind::reverts_made_p: return count_if(0, P, [](const EditRecord& e) { return e.is_revert_action; });
    case BaseKind::e_ns0_p: return count_if(0, P, [](const EditRecord& e) { return e.ns == 0; });
    case BaseKind::articles_p: return distinct_articles(0, P);
    case BaseKind::comment_frac_p: {
      const auto w = edits_in_window(h, cfg, 0, P);
      if (w.empty()) return 0.0;
      return count_if(0, P, [](const EditRecord& e) { return e.has_comment; }) / static_cast<double>(w.size());
    }
    case BaseKind::window_edits: return static_cast<double>(window_count(h, cfg, b.from, b.to));
    case BaseKind::window_days: return static_cast<double>(unique_edit_days(h, cfg, b.from, b.to));
    case BaseKind::window_ns0: return count_if(b.from, b.to, [](const EditRecord& e) { return e.ns == 0; });
    case BaseKind::window_articles: return distinct_articles(b.from, b.to);
  }
  return 0.0;
}

inline FeatureVector evaluate(const CompiledCatalog& c, const EditorHistory& h, const CutoffConfig& cfg) {
  std::vector<double> base(c.bases.size());
  for (std::size_t i = 0; i < base.size(); ++i) base[i] = base_value(c.bases[i], h, cfg);
  FeatureVector out(c.terms.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& t = c.terms[i];
    switch (t.op) {
      case Term::Op::identity: out[i] = base[t.a]; break;
      case Term::Op::log1p: out[i] = std::log1p(base[t.a]); break;
      case Term::Op::product: out[i] = base[t.a] * base[t.b]; break;
    }
  }
  return out;
}

}  // namespace detail

inline FeatureCatalog::FeatureCatalog(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw ArgumentError("duplicate feature name '" + n + "'");
  }
  (void)detail::compile(names_);  // validates every name
}

inline FeatureVector extract(const EditorHistory& h, const CutoffConfig& cfg, const FeatureCatalog& catalog) {
  return detail::evaluate(detail::compile(catalog.names()), h, cfg);
}

inline SegmentKey segment_key(const EditorHistory& h, const CutoffConfig& cfg) {
  return {std::max(0.0, static_cast<double>(cfg.cutoff_ts - h.registration_ts) / kSecondsPerDay),
          unique_edit_days(h, cfg, 0, cfg.persistence_months)};
}

/// One row per history; `y` is the forward-window edit count.
inline Dataset build_dataset(std::span<const EditorHistory> histories, const CutoffConfig& cfg,
                             const FeatureCatalog& catalog, unsigned workers = 1) {
  cfg.validate();
  const auto compiled = detail::compile(catalog.names());
  Dataset ds{catalog, std::vector<TrainingExample>(histories.size())};
  parallel_for(histories.size(), workers, [&](std::size_t i) {
    const auto& h = histories[i];
    ds.rows[i] = {h.editor_id, segment_key(h, cfg), detail::evaluate(compiled, h, cfg), target_edits(h, cfg)};
  });
  return ds;
}

/// Column indices of `wanted` inside `have`; throws on any missing name.
inline std::vector<std::size_t> column_map(const FeatureCatalog& wanted, const FeatureCatalog& have) {
  std::vector<std::size_t> idx;
  idx.reserve(wanted.size());
  for (const auto& n : wanted.names()) {
    const auto i = have.index_of(n);
    if (i == FeatureCatalog::npos) throw ArgumentError("catalog mismatch: feature '" + n + "' not available");
    idx.push_back(i);
  }
  return idx;
}

/// Restricts a dataset to (a reordering of) a sub-catalog.
inline Dataset select(const Dataset& ds, const FeatureCatalog& catalog) {
  const auto idx = column_map(catalog, ds.catalog);
  Dataset out{catalog, {}};
  out.rows.reserve(ds.rows.size());
  for (const auto& r : ds.rows) {
    TrainingExample t{r.editor_id, r.key, FeatureVector(idx.size()), r.y};
    for (std::size_t j = 0; j < idx.size(); ++j) t.features[j] = r.features[idx[j]];
    out.rows.push_back(std::move(t));
  }
  return out;
}

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out{ds.catalog, {}};
  out.rows.reserve(rows.size());
  for (auto i : rows) out.rows.push_back(ds.rows[i]);
  return out;
}

inline FeatureCatalog catalog_union(std::span<const FeatureCatalog> catalogs) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& c : catalogs)
    for (const auto& n : c.names())
      if (seen.insert(n).second) names.push_back(n);
  return FeatureCatalog(std::move(names));
}

// ---------------------------------------------------------------------------
// Frozen catalogs.  docs/feature_catalogs.md mirrors this table.

inline const std::vector<std::string>& loglog_windows() {
  static const std::vector<std::string> w = [] {
    std::vector<std::string> v;
    for (int b = 1; b <= 10; ++b) v.push_back("0_" + std::to_string(b));
    for (int a = 1; a <= 9; ++a) v.push_back(std::to_string(a) + "_" + std::to_string(a + 1));
    return v;
  }();
  return w;
}

/// Feature lists of the seven Nested7 cells, in cell order
/// (old x {0, 1-2, >=3 days}, new x {0, 1-2, 3-10, >10 days}); 43 parameters
/// including one intercept per cell.  Variant "b" swaps raw counts for
/// log1p counts.
inline std::vector<std::vector<std::string>> nested_cell_features(char variant = 'a') {
  std::vector<std::vector<std::string>> cells = {
      {"d_prev", "e_prev", "days_since_last_edit", "age_days"},
      {"e_p", "d_p", "e_prev", "d_prev", "days_since_last_edit"},
      {"e_p", "d_p", "e_1", "e_prev", "d_prev", "reverts_gotten_p", "age_days"},
      {"d_prev", "e_prev", "days_since_last_edit", "age_days"},
      {"e_p", "d_p", "e_prev", "days_since_last_edit", "age_days"},
      {"e_p", "d_p", "e_1", "days_since_last_edit", "reverts_made_p", "age_days"},
      {"e_p", "d_p", "e_1", "days_since_last_edit", "reverts_made_p"},
  };
  if (variant == 'b') {
    for (auto& cell : cells)
      for (auto& n : cell)
        if (n == "e_p" || n == "e_prev" || n == "e_1" || n == "days_since_last_edit") n = "log1p(" + n + ")";
  }
  return cells;
}

inline std::map<std::string, FeatureCatalog> standard_catalogs() {
  std::map<std::string, FeatureCatalog> m;
  const std::vector<std::string> baseline = {"e_p", "e_1", "e_prev", "d_p", "age_days"};
  auto with = [&](std::vector<std::string> extra) {
    auto v = baseline;
    v.insert(v.end(), extra.begin(), extra.end());
    return FeatureCatalog(v);
  };
  m.emplace("persistence", FeatureCatalog({"e_p"}));
  m.emplace("model_q", FeatureCatalog({"e_p"}));
  m.emplace("model_r", FeatureCatalog({"e_p", "age_days", "d_p"}));
  m.emplace("residual", FeatureCatalog({"e_prev"}));
  m.emplace("baseline", FeatureCatalog(baseline));
  m.emplace("interaction_A", with({"e_p*e_prev", "e_1*d_p"}));
  m.emplace("interaction_B", with({"e_p*d_p", "e_prev*d_prev"}));
  m.emplace("interaction_C", with({"e_1*e_p", "d_p*d_prev"}));

  std::vector<std::string> ll;
  for (const char* kind : {"edits_", "days_", "ns0_", "articles_"})
    for (const auto& w : loglog_windows()) ll.push_back("log1p(" + std::string(kind) + w + ")");
  for (const char* f : {"days_since_last_edit", "age_days", "reverts_gotten_p", "reverts_made_p", "comment_frac_p"})
    ll.push_back("log1p(" + std::string(f) + ")");
  m.emplace("loglog80", FeatureCatalog(ll));

  for (char v : {'a', 'b'}) {
    std::vector<FeatureCatalog> cells;
    for (auto& c : nested_cell_features(v)) cells.emplace_back(c);
    m.emplace(v == 'a' ? "nested_per_segment" : "nested_per_segment_b", catalog_union(cells));
  }

  m.emplace("rf_new14", FeatureCatalog({"e_p", "e_1", "e_prev", "d_p", "d_prev", "days_since_last_edit", "age_days",
                                        "reverts_made_p", "e_ns0_p", "articles_p", "comment_frac_p", "edits_0_2",
                                        "edits_1_2", "days_0_1"}));
  m.emplace("rf_old19", FeatureCatalog({"e_p", "e_1", "e_prev", "d_p", "d_prev", "days_since_last_edit", "age_days",
                                        "reverts_gotten_p", "reverts_made_p", "e_ns0_p", "articles_p",
                                        "comment_frac_p", "edits_0_2", "edits_1_2", "days_0_1", "edits_0_10",
                                        "days_0_10", "edits_2_3", "days_5_6"}));
  return m;
}

inline FeatureCatalog standard_catalog(const std::string& name) {
  auto all = standard_catalogs();
  const auto it = all.find(name);
  if (it == all.end()) throw ArgumentError("unknown catalog '" + name + "'");
  return it->second;
}

/// featurize output: editor_id, catalog features in order, y.
inline std::string serialize_dataset(const Dataset& ds, bool with_target = true) {
  std::string out = "editor_id";
  for (const auto& n : ds.catalog.names()) out += "\t" + n;
  if (with_target) out += "\ty";
  out += '\n';
  for (const auto& r : ds.rows) {
    out += std::to_string(r.editor_id);
    for (double v : r.features) out += "\t" + io::format_double(v);
    if (with_target) out += "\t" + std::to_string(r.y);
    out += '\n';
  }
  return out;
}

}  // namespace editcast
