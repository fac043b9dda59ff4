#pragma once

// Small builders shared by the unit tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "editcast.hpp"

namespace testing {

using namespace editcast;

inline constexpr Timestamp kDay = kSecondsPerDay;
inline constexpr Timestamp kCutoff = 1283299200;

inline EditRecord edit_at(EditorId id, Timestamp ts) {
  EditRecord e;
  e.editor_id = id;
  e.timestamp = ts;
  e.article_id = 1;
  return e;
}

/// History for editor `id` registered `age_days` before the cutoff with edits
/// at the given offsets (seconds, relative to the cutoff).
inline EditorHistory history(EditorId id, Timestamp age_days, std::vector<Timestamp> offsets) {
  EditorHistory h;
  h.editor_id = id;
  h.registration_ts = kCutoff - age_days * kDay;
  std::ranges::sort(offsets);
  for (auto o : offsets) h.edits.push_back(edit_at(id, kCutoff + o));
  return h;
}

/// Random valid history with varied flags, for property tests.
inline EditorHistory random_history(Rng& rng, EditorId id, int max_edits = 40) {
  EditorHistory h;
  h.editor_id = id;
  h.registration_ts = kCutoff - static_cast<Timestamp>(uniform01(rng) * 700.0 * kDay) - 1;
  const int n = static_cast<int>(uniform01(rng) * max_edits);
  const Timestamp span = kCutoff + 200 * kDay - h.registration_ts;
  for (int i = 0; i < n; ++i) {
    EditRecord e;
    e.editor_id = id;
    e.timestamp = h.registration_ts + static_cast<Timestamp>(uniform01(rng) * static_cast<double>(span));
    e.ns = static_cast<int>(uniform01(rng) * 4);
    e.article_id = 1 + static_cast<ArticleId>(uniform01(rng) * 20);
    e.delta_chars = static_cast<std::int64_t>(uniform01(rng) * 2000) - 1000;
    e.was_reverted = uniform01(rng) < 0.2;
    if (e.was_reverted && uniform01(rng) < 0.7) e.reverted_by = 1000 + static_cast<EditorId>(uniform01(rng) * 50);
    e.is_revert_action = uniform01(rng) < 0.1;
    e.has_comment = uniform01(rng) < 0.5;
    h.edits.push_back(e);
  }
  std::ranges::stable_sort(h.edits, {}, &EditRecord::timestamp);
  return h;
}

/// Dataset over `catalog` with the given rows (features in catalog order).
inline Dataset make_dataset(FeatureCatalog catalog, const std::vector<std::vector<double>>& x,
                            const std::vector<std::int64_t>& y, const std::vector<SegmentKey>& keys = {}) {
  Dataset ds{std::move(catalog), {}};
  for (std::size_t i = 0; i < x.size(); ++i) {
    TrainingExample t;
    t.editor_id = static_cast<EditorId>(i + 1);
    t.key = keys.empty() ? SegmentKey{400.0, 5} : keys[i];
    t.features = x[i];
    t.y = y[i];
    ds.rows.push_back(std::move(t));
  }
  return ds;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("editcast_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
