#pragma once

// Any trained predictor the pipeline can store on disk: a segmented
// parametric model, a segmented forest, or a bag of parametric fits.

#include <filesystem>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "editcast/ensemble.hpp"
#include "editcast/forest.hpp"
#include "editcast/io.hpp"
#include "editcast/optim.hpp"

namespace editcast {

using Model = std::variant<FittedModel, ForestModel, BaggedModel>;

inline std::vector<double> predict_dataset(const Model& m, const Dataset& ds) {
  return std::visit([&](const auto& v) { return predict_dataset(v, ds); }, m);
}

inline std::size_t leaf_count(const ForestModel& m) {
  std::size_t n = 0;
  for (const auto& f : m.cells)
    for (const auto& t : f.trees)
      for (const auto& node : t.nodes) n += node.is_leaf() ? 1 : 0;
  return n;
}

/// Leaderboard parameter count.  Bags report one member's count (all members
/// share a structure); forests report their number of leaves.
inline std::size_t parameter_count(const Model& m) {
  struct V {
    std::size_t operator()(const FittedModel& f) const { return f.parameter_count(); }
    std::size_t operator()(const ForestModel& f) const { return leaf_count(f); }
    std::size_t operator()(const BaggedModel& b) const { return b.members.front().parameter_count(); }
  };
  return std::visit(V{}, m);
}

inline FeatureCatalog model_catalog(const Model& m) {
  struct V {
    FeatureCatalog operator()(const FittedModel& f) const { return f.catalog; }
    FeatureCatalog operator()(const ForestModel& f) const { return f.catalog(); }
    FeatureCatalog operator()(const BaggedModel& b) const { return (*this)(b.members.front()); }
  };
  return std::visit(V{}, m);
}

inline std::string serialize(const Model& m) {
  std::ostringstream os;
  struct V {
    std::ostream& os;
    void operator()(const FittedModel& f) const { write_model(os, f); }
    void operator()(const ForestModel& f) const { write_forest_model(os, f); }
    void operator()(const BaggedModel& b) const { write_bag(os, b); }
  };
  std::visit(V{os}, m);
  return os.str();
}

/// Dispatches on the first token of the text.
inline Model parse_any_model(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  is >> magic;
  is.seekg(0);
  if (magic == "editcast-model") return read_model(is);
  if (magic == "editcast-forest") return read_forest_model(is);
  if (magic == "editcast-bag") return read_bag(is);
  throw IntegrityError("model file: unknown format '" + magic + "'");
}

inline void save_model(const std::filesystem::path& path, const Model& m) { io::write_file_atomic(path, serialize(m)); }

inline Model load_model(const std::filesystem::path& path) {
  try {
    return parse_any_model(io::read_file(path));
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

}  // namespace editcast
