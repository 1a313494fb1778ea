#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "missinglens/gam.hpp"

namespace missinglens {

enum class EditAction { FlattenTo, FlattenToBinOf, ShiftBy };

std::string to_string(EditAction a);
EditAction edit_action_from_string(std::string_view s);

struct Edit {
  std::string feature;
  double lo = 0, hi = 0;   // region in feature units, lo < hi
  EditAction action = EditAction::FlattenTo;
  double value = 0;        // flatten target, reference point, or shift delta
};

// Declarative, replayable shape edits. Bins partially covered by a region are
// split at the region boundary, so edits land exactly on [lo, hi]. Metadata is
// caller-supplied (no wall clock), keeping outputs byte-reproducible.
struct EditScript {
  std::vector<Edit> edits;
  bool recenter = false;
  std::string author;
  std::string note;

  nlohmann::json to_json() const;
  static EditScript from_json(const nlohmann::json& j);
};

GamModel apply_edit(const GamModel& model, const EditScript& script);

struct BinDiff {
  std::string feature;
  double lo = 0, hi = 0;
  bool missing_bin = false;
  double before = 0, after = 0;
};

struct ModelDiff {
  std::vector<BinDiff> bins;
  double intercept_before = 0, intercept_after = 0;
  bool intercept_changed = false;

  bool empty() const { return bins.empty() && !intercept_changed; }
};

// Structural diff of two models over the union refinement of their bin edges.
// Models must share features, kinds, vocabularies and missing-bin structure.
ModelDiff diff_models(const GamModel& a, const GamModel& b);

}  // namespace missinglens
