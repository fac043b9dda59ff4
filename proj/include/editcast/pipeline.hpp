#pragma once

// End-to-end workflow pieces shared by the command line tool and the
// acceptance harness: editor-level holdout split, the model ladder,
// leaderboard files and run manifests.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "editcast/editlog.hpp"
#include "editcast/ensemble.hpp"
#include "editcast/features.hpp"
#include "editcast/forest.hpp"
#include "editcast/io.hpp"
#include "editcast/metrics.hpp"
#include "editcast/model.hpp"
#include "editcast/optim.hpp"
#include "editcast/random.hpp"
#include "editcast/segments.hpp"

namespace editcast {

// ---------------------------------------------------------------------------
// Holdout split

struct Split {
  Dataset train;
  Dataset holdout;
};

/// Seeded split by editor: a permutation of the distinct editor ids puts the
/// first round(train_frac * editors) of them in train.  Row order is kept.
inline Split split_by_editor(const Dataset& ds, double train_frac, std::uint64_t seed) {
  detail::require(train_frac > 0.0 && train_frac < 1.0, "split: train fraction must be in (0, 1)");
  std::vector<EditorId> ids;
  for (const auto& r : ds.rows) ids.push_back(r.editor_id);
  std::ranges::sort(ids);
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  detail::require(ids.size() >= 2, "split: need at least 2 editors");
  auto rng = make_rng(seed, "split");
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(ids[i], ids[j]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(ids.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  std::vector<EditorId> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::ranges::sort(train_ids);
  std::vector<std::size_t> tr, ho;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (std::ranges::binary_search(train_ids, ds.rows[i].editor_id) ? tr : ho).push_back(i);
  return {subset(ds, tr), subset(ds, ho)};
}

// ---------------------------------------------------------------------------
// Leaderboard and evaluation files

struct LeaderboardRow {
  std::string model_name;
  std::size_t params = 0;
  double epsilon = 0.0;
};

inline constexpr std::string_view kLeaderboardHeader = "model_name\tparams\tepsilon";
inline constexpr int kEpsilonDecimals = 9;

inline std::string format_leaderboard_row(const LeaderboardRow& r) {
  return r.model_name + "\t" + std::to_string(r.params) + "\t" + io::format_fixed(r.epsilon, kEpsilonDecimals) + "\n";
}

inline std::string serialize_leaderboard(const std::vector<LeaderboardRow>& rows) {
  std::string out = std::string(kLeaderboardHeader) + "\n";
  for (const auto& r : rows) out += format_leaderboard_row(r);
  return out;
}

inline std::vector<LeaderboardRow> parse_leaderboard(std::string_view text) {
  std::vector<LeaderboardRow> rows;
  detail::for_each_line(text, true, [&](std::string_view line, std::size_t line_no) {
    const auto f = detail::split_tabs(line);
    if (f.size() != 3) throw ParseError(line_no, "expected 3 leaderboard fields, got " + std::to_string(f.size()));
    LeaderboardRow r;
    r.model_name = std::string(f[0]);
    r.params = static_cast<std::size_t>(detail::parse_int(f[1], line_no, "params"));
    const auto [end, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.epsilon);
    if (ec != std::errc{} || end != f[2].data() + f[2].size()) throw ParseError(line_no, "bad epsilon");
    rows.push_back(std::move(r));
  });
  return rows;
}

/// Appends one row, writing the header first when the file is new or empty.
inline void append_leaderboard_row(const std::filesystem::path& path, const LeaderboardRow& row) {
  std::string text;
  if (std::filesystem::exists(path)) text = io::read_file(path);
  if (text.empty()) text = std::string(kLeaderboardHeader) + "\n";
  text += format_leaderboard_row(row);
  io::write_file_atomic(path, text);
}

inline std::string format_eval_row(const std::string& name, const EvalResult& r) {
  return name + "\t" + std::to_string(r.n) + "\t" + io::format_fixed(r.epsilon, kEpsilonDecimals) + "\n";
}

/// Scores a predictions file against the targets of `ds`, matched by editor.
inline EvalResult score_predictions(const std::vector<Prediction>& preds, const Dataset& ds) {
  std::map<EditorId, std::int64_t> y;
  for (const auto& r : ds.rows) y[r.editor_id] = r.y;
  std::vector<double> p, a;
  for (const auto& q : preds) {
    const auto it = y.find(q.editor_id);
    if (it == y.end()) throw IntegrityError("eval: editor " + std::to_string(q.editor_id) + " has no target");
    p.push_back(q.value);
    a.push_back(static_cast<double>(it->second));
  }
  return rmsle(p, a);
}

// ---------------------------------------------------------------------------
// Model ladder

struct LadderOptions {
  std::uint64_t seed = 42;
  unsigned workers = 1;
  int bag_k = 25;
  bool with_bags = true;
  bool with_forest = true;
  OptimizerConfig optimizer;
};

struct LadderEntry {
  std::string name;
  std::optional<Model> model;  // empty for ensembles of other entries
  std::vector<double> holdout_predictions;
  EvalResult holdout;
  std::size_t params = 0;
  bool monotone = true;  // training objective never rose during fitting
};

struct LadderResult {
  std::vector<LadderEntry> entries;
  EvalResult constant_baseline;  // best single constant fitted on train
  double constant = 0.0;

  const LadderEntry& at(std::string_view name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw ArgumentError("ladder: no entry '" + std::string(name) + "'");
  }
  std::vector<LeaderboardRow> leaderboard() const {
    std::vector<LeaderboardRow> rows{{"optimal_constant", 1, constant_baseline.epsilon}};
    for (const auto& e : entries) rows.push_back({e.name, e.params, e.holdout.epsilon});
    return rows;
  }
};

/// Names of the eight ensemble members, in ensemble order.
inline const std::vector<std::string>& ensemble_member_names() {
  static const std::vector<std::string> names{
      "model1_loglog",        "model2_linear",          "model3_interaction_a",       "model4_interaction_b",
      "model5_interaction_c", "model6_nested_bag_median", "model7_nested_bag_geometric", "model8_forest"};
  return names;
}

/// Catalog covering every feature the ladder uses.
inline FeatureCatalog ladder_catalog() {
  std::vector<FeatureCatalog> cs;
  for (const auto& [name, c] : standard_catalogs()) cs.push_back(c);
  return catalog_union(cs);
}

inline ModelForm nested_form(char variant) {
  ModelForm f = ModelForm::linear(standard_catalog(variant == 'a' ? "nested_per_segment" : "nested_per_segment_b"));
  f.cell_features = nested_cell_features(variant);
  return f;
}

/// Fits the full ladder on `train` and scores every model on `holdout`.
inline LadderResult run_ladder(const Dataset& train, const Dataset& holdout, const LadderOptions& opt) {
  LadderResult out;
  const auto y_train = targets(train);
  const auto y_hold = targets(holdout);
  out.constant = optimal_constant(y_train);
  out.constant_baseline = rmsle(std::vector<double>(holdout.size(), out.constant), y_hold);

  auto cfg_for = [&](std::string_view name) {
    auto c = opt.optimizer;
    c.seed = derive_seed(opt.seed, std::string("ladder.") + std::string(name));
    return c;
  };
  auto add = [&](std::string name, Model m, bool monotone) {
    LadderEntry e;
    e.name = std::move(name);
    e.holdout_predictions = predict_dataset(m, holdout);
    e.holdout = rmsle(e.holdout_predictions, y_hold);
    e.params = parameter_count(m);
    e.monotone = monotone;
    e.model = std::move(m);
    out.entries.push_back(std::move(e));
  };
  auto add_fit = [&](std::string name, const ModelForm& form, SegmentScheme scheme,
                     std::shared_ptr<const FittedModel> offset = nullptr) {
    auto m = fit(train, form, scheme, cfg_for(name), std::move(offset));
    const bool mono = training_objective_monotone(m);
    add(std::move(name), std::move(m), mono);
    return std::get<FittedModel>(*out.entries.back().model);
  };

  add_fit("persistence", ModelForm::persistence(), SegmentScheme::whole);
  add_fit("downscaled", ModelForm::downscaled(), SegmentScheme::whole);
  add_fit("model_p", ModelForm::downscaled(), SegmentScheme::join_date3);
  add_fit("model_q", ModelForm::linear(standard_catalog("model_q")), SegmentScheme::join_date3);
  add_fit("nested7_linear", nested_form('a'), SegmentScheme::nested7);
  const auto model_r = add_fit("model_r", ModelForm::linear(standard_catalog("model_r")), SegmentScheme::join_date3);
  add_fit("model_r_residual", ModelForm::linear(standard_catalog("residual")), SegmentScheme::join_date3,
          std::make_shared<const FittedModel>(model_r));

  add_fit("model1_loglog", ModelForm::log_log(standard_catalog("loglog80")), SegmentScheme::whole);
  add_fit("model2_linear", ModelForm::linear(standard_catalog("baseline")), SegmentScheme::join_date3);
  add_fit("model3_interaction_a", ModelForm::interaction(standard_catalog("interaction_A")), SegmentScheme::join_date3);
  add_fit("model4_interaction_b", ModelForm::interaction(standard_catalog("interaction_B")), SegmentScheme::join_date3);
  add_fit("model5_interaction_c", ModelForm::interaction(standard_catalog("interaction_C")), SegmentScheme::join_date3);

  if (opt.with_bags) {
    for (auto [name, variant, kind] : {std::tuple{"model6_nested_bag_median", 'a', AggregationKind::median},
                                       std::tuple{"model7_nested_bag_geometric", 'b', AggregationKind::geometric}}) {
      const auto form = nested_form(variant);
      const auto base = cfg_for(name);
      auto bag = bootstrap_bag(
          train, opt.bag_k,
          [&](const Dataset& d, std::size_t r) {
            auto c = base;
            c.seed = derive_seed(base.seed, "replicate", r);
            return fit(d, form, SegmentScheme::nested7, c);
          },
          AggregationRule{kind, {}}, derive_seed(opt.seed, std::string("bag.") + name), opt.workers);
      const bool mono = training_objective_monotone(bag);
      add(name, std::move(bag), mono);
    }
  }
  if (opt.with_forest) {
    add("model8_forest", train_forest_model(train, SegmentScheme::old_new2, model8_specs(opt.seed), opt.workers), true);
  }

  std::vector<std::vector<double>> cols;
  for (const auto& n : ensemble_member_names()) {
    for (const auto& e : out.entries)
      if (e.name == n) cols.push_back(e.holdout_predictions);
  }
  if (cols.size() >= 2) {
    for (auto kind : {AggregationKind::geometric, AggregationKind::arithmetic, AggregationKind::median}) {
      LadderEntry e;
      e.name = "ensemble_" + std::string(aggregation_name(kind));
      e.holdout_predictions = aggregate_columns(cols, AggregationRule{kind, {}});
      e.holdout = rmsle(e.holdout_predictions, y_hold);
      for (const auto& n : ensemble_member_names())
        for (const auto& m : out.entries)
          if (m.name == n) e.params += m.params;
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest

/// Collects what is needed to re-derive a run's outputs.  Input digests are
/// recorded when added (before any fitting); write() is atomic.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) { j_["command"] = std::move(command); }

  void set(const std::string& key, nlohmann::json value) { j_["config"][key] = std::move(value); }
  void add_input(const std::filesystem::path& p) { j_["inputs"][p.string()] = io::file_digest(p); }
  void add_output(const std::filesystem::path& p) { j_["outputs"].push_back(p.string()); }
  void mark(const std::string& phase) {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    j_["timing_seconds"][phase] = d.count();
  }
  const nlohmann::json& json() const { return j_; }

  void write(const std::filesystem::path& path) {
    mark("total");
    for (const auto& out : j_["outputs"]) {
      const std::filesystem::path p = out.get<std::string>();
      if (std::filesystem::exists(p)) j_["output_digests"][p.string()] = io::file_digest(p);
    }
    io::write_file_atomic(path, j_.dump(2) + "\n");
  }

 private:
  nlohmann::json j_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace editcast
