#pragma once

// Regression random forest (CART trees on bootstrap resamples with per-node
// feature subsampling).  Trees fit z = ln(1+y) by default and the forest
// averages leaf values in that space.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "editcast/error.hpp"
#include "editcast/features.hpp"
#include "editcast/io.hpp"
#include "editcast/optim.hpp"
#include "editcast/parallel.hpp"
#include "editcast/random.hpp"
#include "editcast/segments.hpp"

namespace editcast {

struct ForestConfig {
  int n_trees = 150;
  int mtry = 0;  // 0 means max(1, floor(k / 3))
  int min_leaf = 5;
  int max_depth = 25;
  bool bootstrap = true;
  bool log_target = true;
  std::uint64_t seed = 0;

  int effective_mtry(std::size_t k) const {
    return mtry > 0 ? mtry : std::max(1, static_cast<int>(k / 3));
  }

  void validate(std::size_t k) const {
    detail::require(n_trees >= 1, "forest: n_trees must be >= 1");
    detail::require(min_leaf >= 1, "forest: min_leaf must be >= 1");
    detail::require(max_depth >= 0, "forest: max_depth must be >= 0");
    detail::require(k >= 1, "forest: empty catalog");
    detail::require(effective_mtry(k) <= static_cast<int>(k), "forest: mtry exceeds catalog size");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean training target of the node
  std::int64_t n_rows = 0;
  int depth = 0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const {
    const TreeNode* n = &nodes.front();
    while (!n->is_leaf()) n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right)];
    return *n;
  }
};

struct Forest {
  FeatureCatalog catalog;
  ForestConfig config;
  std::vector<RegressionTree> trees;
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double child_sse = std::numeric_limits<double>::infinity();
};

/// Best midpoint split of `rows` on `feature`; both children keep at least
/// min_leaf rows.  Earlier (lower) thresholds win ties.
inline SplitChoice best_split_on(const std::vector<std::vector<double>>& cols, std::span<const double> z,
                                 std::span<const std::size_t> rows, int feature, int min_leaf,
                                 std::vector<std::pair<double, double>>& scratch) {
  const auto& col = cols[static_cast<std::size_t>(feature)];
  scratch.clear();
  for (auto r : rows) scratch.emplace_back(col[r], z[r]);
  std::ranges::sort(scratch, [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0, total_sq = 0.0;
  for (const auto& [v, t] : scratch) {
    total += t;
    total_sq += t * t;
  }
  SplitChoice best;
  best.feature = feature;
  const auto n = scratch.size();
  double left = 0.0, left_sq = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    left += scratch[i - 1].second;
    left_sq += scratch[i - 1].second * scratch[i - 1].second;
    if (scratch[i - 1].first == scratch[i].first) continue;
    if (i < static_cast<std::size_t>(min_leaf) || n - i < static_cast<std::size_t>(min_leaf)) continue;
    const double nl = static_cast<double>(i);
    const double nr = static_cast<double>(n - i);
    const double right = total - left;
    const double right_sq = total_sq - left_sq;
    const double sse = (left_sq - left * left / nl) + (right_sq - right * right / nr);
    if (sse < best.child_sse) {
      best.child_sse = sse;
      const double lo = scratch[i - 1].first;
      const double hi = scratch[i].first;
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid < hi)) mid = lo;
      best.threshold = mid;
    }
  }
  return best;
}

inline RegressionTree grow_tree(const std::vector<std::vector<double>>& cols, std::span<const double> z,
                                std::vector<std::size_t> sample, const ForestConfig& cfg, Rng& rng) {
  const auto k = cols.size();
  const int mtry = cfg.effective_mtry(k);
  RegressionTree tree;
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
  };
  std::vector<Pending> stack;
  tree.nodes.push_back({});
  stack.push_back({0, std::move(sample)});
  std::vector<std::pair<double, double>> scratch;
  std::vector<int> features(k);
  while (!stack.empty()) {
    auto [id, rows] = std::move(stack.back());
    stack.pop_back();
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto r : rows) {
      sum += z[r];
      lo = std::min(lo, z[r]);
      hi = std::max(hi, z[r]);
    }
    const double n = static_cast<double>(rows.size());
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.value = sum / n;
    node.n_rows = static_cast<std::int64_t>(rows.size());
    const int depth = node.depth;
    if (rows.size() < 2 * static_cast<std::size_t>(cfg.min_leaf) || depth >= cfg.max_depth || lo == hi) continue;

    std::iota(features.begin(), features.end(), 0);
    for (int i = 0; i < mtry; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(uniform01(rng) * static_cast<double>(k - static_cast<std::size_t>(i)));
      std::swap(features[static_cast<std::size_t>(i)], features[j]);
    }
    std::vector<int> tried(features.begin(), features.begin() + mtry);
    std::ranges::sort(tried);
    double parent_sse = 0.0;
    for (auto r : rows) parent_sse += (z[r] - node.value) * (z[r] - node.value);
    SplitChoice best;
    for (int f : tried) {
      const auto s = best_split_on(cols, z, rows, f, cfg.min_leaf, scratch);
      if (s.child_sse < best.child_sse) best = s;
    }
    if (best.feature < 0 || !(best.child_sse < parent_sse)) continue;

    std::vector<std::size_t> left_rows, right_rows;
    const auto& col = cols[static_cast<std::size_t>(best.feature)];
    for (auto r : rows) (col[r] <= best.threshold ? left_rows : right_rows).push_back(r);
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({.depth = depth + 1});
    tree.nodes.push_back({.depth = depth + 1});
    auto& parent = tree.nodes[static_cast<std::size_t>(id)];
    parent.feature = best.feature;
    parent.threshold = best.threshold;
    parent.left = left;
    parent.right = left + 1;
    stack.push_back({left + 1, std::move(right_rows)});
    stack.push_back({left, std::move(left_rows)});
  }
  return tree;
}

}  // namespace detail

/// Trains on the dataset's columns named by `catalog`.
inline Forest train_forest(const Dataset& examples, const FeatureCatalog& catalog, const ForestConfig& cfg,
                           unsigned workers = 1) {
  cfg.validate(catalog.size());
  if (examples.size() < 2 * static_cast<std::size_t>(cfg.min_leaf)) {
    throw ArgumentError("train_forest: need at least " + std::to_string(2 * cfg.min_leaf) + " examples, got " +
                        std::to_string(examples.size()));
  }
  const auto idx = column_map(catalog, examples.catalog);
  const auto n = examples.size();
  std::vector<std::vector<double>> cols(idx.size(), std::vector<double>(n));
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = examples.rows[i];
    for (std::size_t j = 0; j < idx.size(); ++j) cols[j][i] = r.features[idx[j]];
    z[i] = cfg.log_target ? std::log1p(static_cast<double>(r.y)) : static_cast<double>(r.y);
  }
  Forest forest{catalog, cfg, std::vector<RegressionTree>(static_cast<std::size_t>(cfg.n_trees))};
  parallel_for(forest.trees.size(), workers, [&](std::size_t t) {
    auto rng = make_rng(cfg.seed, "forest.tree", t);
    std::vector<std::size_t> sample(n);
    if (cfg.bootstrap) {
      for (auto& s : sample) s = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    forest.trees[t] = detail::grow_tree(cols, z, std::move(sample), cfg, rng);
  });
  return forest;
}

/// Averages leaf values over trees (sorted first, so storage order cannot
/// change the result) and maps back to a count.
inline double predict_forest(const Forest& forest, std::span<const double> features) {
  if (features.size() != forest.catalog.size()) {
    throw ArgumentError("predict_forest: catalog mismatch (expected " + std::to_string(forest.catalog.size()) +
                        " features, got " + std::to_string(features.size()) + ")");
  }
  std::vector<double> leaves;
  leaves.reserve(forest.trees.size());
  for (const auto& t : forest.trees) leaves.push_back(t.leaf_for(features).value);
  std::ranges::sort(leaves);
  const double mean = detail::pairwise_sum(leaves) / static_cast<double>(leaves.size());
  return clamp_prediction(forest.config.log_target ? std::expm1(mean) : mean);
}

// ---------------------------------------------------------------------------
// One forest per segment cell (Model-8 uses old/new with 19/14 features).

struct ForestModel {
  SegmentScheme scheme = SegmentScheme::whole;
  std::vector<Forest> cells;
  std::vector<bool> fallback;  // cell trained on all rows (too few of its own)

  FeatureCatalog catalog() const {
    std::vector<FeatureCatalog> cs;
    for (const auto& f : cells) cs.push_back(f.catalog);
    return catalog_union(cs);
  }
};

struct ForestCellSpec {
  FeatureCatalog catalog;
  ForestConfig config;
};

inline ForestModel train_forest_model(const Dataset& data, SegmentScheme scheme, const std::vector<ForestCellSpec>& specs,
                                      unsigned workers = 1) {
  if (static_cast<int>(specs.size()) != cell_count(scheme)) throw ArgumentError("train_forest_model: one spec per cell required");
  ForestModel m;
  m.scheme = scheme;
  for (int c = 0; c < cell_count(scheme); ++c) {
    const auto& spec = specs[static_cast<std::size_t>(c)];
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (assign(data.rows[i].key, scheme).cell == c) rows.push_back(i);
    const bool starved = rows.size() < 2 * static_cast<std::size_t>(spec.config.min_leaf);
    m.cells.push_back(train_forest(starved ? data : subset(data, rows), spec.catalog, spec.config, workers));
    m.fallback.push_back(starved);
  }
  return m;
}

inline std::vector<ForestCellSpec> model8_specs(std::uint64_t seed) {
  ForestConfig old_cfg;
  old_cfg.n_trees = 200;
  old_cfg.seed = derive_seed(seed, "model8.old");
  ForestConfig new_cfg;
  new_cfg.n_trees = 150;
  new_cfg.seed = derive_seed(seed, "model8.new");
  // old_new2 cell order: old, new
  return {{standard_catalog("rf_old19"), old_cfg}, {standard_catalog("rf_new14"), new_cfg}};
}

inline std::vector<double> predict_dataset(const ForestModel& m, const Dataset& ds) {
  std::vector<std::vector<std::size_t>> maps;
  for (const auto& f : m.cells) maps.push_back(column_map(f.catalog, ds.catalog));
  std::vector<double> out(ds.size());
  std::vector<double> x;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = static_cast<std::size_t>(assign(ds.rows[i].key, m.scheme).cell);
    x.resize(maps[c].size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = ds.rows[i].features[maps[c][j]];
    out[i] = predict_forest(m.cells[c], x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: flat node arrays, 17 significant digits.

inline void write_forest(std::ostream& os, const Forest& f) {
  const auto& c = f.config;
  os << "forest catalog " << f.catalog.size();
  for (const auto& n : f.catalog.names()) os << ' ' << n;
  os << "\nconfig " << c.n_trees << ' ' << c.mtry << ' ' << c.min_leaf << ' ' << c.max_depth << ' '
     << (c.bootstrap ? 1 : 0) << ' ' << (c.log_target ? 1 : 0) << ' ' << c.seed << "\n";
  os << "trees " << f.trees.size() << "\n";
  for (const auto& t : f.trees) {
    os << "tree " << t.nodes.size() << "\n";
    for (const auto& n : t.nodes) {
      os << n.feature << ' ' << io::format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
         << io::format_double(n.value) << ' ' << n.n_rows << ' ' << n.depth << "\n";
    }
  }
}

inline Forest read_forest(std::istream& is) {
  Forest f;
  detail::expect(is, "forest");
  detail::expect(is, "catalog");
  std::vector<std::string> names(detail::read_value<std::size_t>(is, "catalog size"));
  for (auto& n : names) n = detail::read_value<std::string>(is, "feature name");
  f.catalog = FeatureCatalog(std::move(names));
  detail::expect(is, "config");
  auto& c = f.config;
  c.n_trees = detail::read_value<int>(is, "n_trees");
  c.mtry = detail::read_value<int>(is, "mtry");
  c.min_leaf = detail::read_value<int>(is, "min_leaf");
  c.max_depth = detail::read_value<int>(is, "max_depth");
  c.bootstrap = detail::read_value<int>(is, "bootstrap") != 0;
  c.log_target = detail::read_value<int>(is, "log_target") != 0;
  c.seed = detail::read_value<std::uint64_t>(is, "seed");
  detail::expect(is, "trees");
  f.trees.resize(detail::read_value<std::size_t>(is, "tree count"));
  for (auto& t : f.trees) {
    detail::expect(is, "tree");
    t.nodes.resize(detail::read_value<std::size_t>(is, "node count"));
    if (t.nodes.empty()) throw IntegrityError("forest file: empty tree");
    for (auto& n : t.nodes) {
      n.feature = detail::read_value<int>(is, "feature");
      n.threshold = detail::read_double(is);
      n.left = detail::read_value<int>(is, "left");
      n.right = detail::read_value<int>(is, "right");
      n.value = detail::read_double(is);
      n.n_rows = detail::read_value<std::int64_t>(is, "rows");
      n.depth = detail::read_value<int>(is, "depth");
    }
    const auto size = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) continue;
      if (n.feature >= static_cast<int>(f.catalog.size()) || n.left <= 0 || n.right <= 0 || n.left >= size ||
          n.right >= size) {
        throw IntegrityError("forest file: bad node reference");
      }
    }
  }
  return f;
}

inline void write_forest_model(std::ostream& os, const ForestModel& m) {
  os << "editcast-forest 1\nscheme " << scheme_name(m.scheme) << "\ncells " << m.cells.size() << "\n";
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    os << "cell " << c << " fallback " << (m.fallback[c] ? 1 : 0) << "\n";
    write_forest(os, m.cells[c]);
  }
  os << "end\n";
}

inline ForestModel read_forest_model(std::istream& is) {
  detail::expect(is, "editcast-forest");
  if (detail::read_value<int>(is, "version") != 1) throw IntegrityError("forest file: unsupported version");
  ForestModel m;
  detail::expect(is, "scheme");
  m.scheme = parse_scheme(detail::read_value<std::string>(is, "scheme"));
  detail::expect(is, "cells");
  const auto n = detail::read_value<std::size_t>(is, "cell count");
  if (static_cast<int>(n) != cell_count(m.scheme)) throw IntegrityError("forest file: cell count does not match scheme");
  for (std::size_t c = 0; c < n; ++c) {
    detail::expect(is, "cell");
    (void)detail::read_value<std::size_t>(is, "cell index");
    detail::expect(is, "fallback");
    m.fallback.push_back(detail::read_value<int>(is, "fallback") != 0);
    m.cells.push_back(read_forest(is));
  }
  detail::expect(is, "end");
  return m;
}

}  // namespace editcast
