#include "missinglens/editing.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace missinglens {

std::string to_string(EditAction a) {
  switch (a) {
    case EditAction::FlattenTo: return "flatten_to";
    case EditAction::FlattenToBinOf: return "flatten_to_bin_of";
    case EditAction::ShiftBy: return "shift_by";
  }
  return "flatten_to";
}

EditAction edit_action_from_string(std::string_view s) {
  if (s == "flatten_to") return EditAction::FlattenTo;
  if (s == "flatten_to_bin_of") return EditAction::FlattenToBinOf;
  if (s == "shift_by") return EditAction::ShiftBy;
  throw ParseError("unknown edit action: " + std::string(s));
}

nlohmann::json EditScript::to_json() const {
  nlohmann::json j;
  j["recenter"] = recenter;
  if (!author.empty()) j["author"] = author;
  if (!note.empty()) j["note"] = note;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : edits) {
    arr.push_back({{"feature", e.feature},
                   {"region", {e.lo, e.hi}},
                   {"action", to_string(e.action)},
                   {"value", e.value}});
  }
  j["edits"] = std::move(arr);
  return j;
}

EditScript EditScript::from_json(const nlohmann::json& j) {
  EditScript script;
  script.recenter = j.value("recenter", false);
  script.author = j.value("author", "");
  script.note = j.value("note", "");
  if (!j.contains("edits") || !j["edits"].is_array())
    throw ParseError("edit script: missing 'edits' array");
  for (const auto& e : j["edits"]) {
    Edit edit;
    edit.feature = e.at("feature").get<std::string>();
    const auto& region = e.at("region");
    if (!region.is_array() || region.size() != 2)
      throw ParseError("edit script: region must be [lo, hi]");
    edit.lo = region[0].get<double>();
    edit.hi = region[1].get<double>();
    if (!(edit.lo < edit.hi)) throw ParseError("edit script: region requires lo < hi");
    edit.action = edit_action_from_string(e.at("action").get<std::string>());
    edit.value = e.at("value").get<double>();
    script.edits.push_back(std::move(edit));
  }
  return script;
}

namespace {

// Insert a strict-interior cut into a shape's value bins. Scores duplicate so
// predictions are unchanged; counts split in proportion to width.
void split_at(ShapeFunction& shape, double x) {
  BinLayout& layout = shape.layout;
  const int nv = static_cast<int>(layout.edges.size()) - 1;
  if (x <= layout.edges[0] || x >= layout.edges[nv]) return;

  int k = layout.value_bin_of(x);
  if (layout.edges[k] == x) return;  // already an edge (x lands on bin k's lo)
  if (layout.edges[k + 1] == x) return;

  Eigen::VectorXd edges(layout.edges.size() + 1);
  edges.head(k + 1) = layout.edges.head(k + 1);
  edges[k + 1] = x;
  edges.tail(layout.edges.size() - (k + 1)) = layout.edges.tail(layout.edges.size() - (k + 1));

  const double w = layout.edges[k + 1] - layout.edges[k];
  const double left_frac = (x - layout.edges[k]) / w;
  const double left_count = layout.counts[k] * left_frac;

  Eigen::VectorXd counts(layout.counts.size() + 1);
  Eigen::VectorXd scores(shape.scores.size() + 1);
  for (int b = 0, t = 0; b < layout.counts.size(); ++b, ++t) {
    counts[t] = layout.counts[b];
    scores[t] = shape.scores[b];
    if (b == k) {
      counts[t] = left_count;
      counts[t + 1] = layout.counts[b] - left_count;
      scores[t + 1] = shape.scores[b];
      ++t;
    }
  }
  layout.edges = edges;
  layout.counts = counts;
  shape.scores = scores;
  if (layout.missing_bin && *layout.missing_bin > k) ++*layout.missing_bin;
}

}  // namespace

GamModel apply_edit(const GamModel& model, const EditScript& script) {
  GamModel out = model;
  std::set<std::string> touched;
  nlohmann::json resolved = nlohmann::json::array();

  for (const auto& edit : script.edits) {
    const int fidx = out.feature_index(edit.feature);
    if (fidx < 0) throw SchemaError("apply_edit: model has no feature " + edit.feature);
    ShapeFunction& shape = out.shapes[static_cast<std::size_t>(fidx)];
    if (shape.layout.categorical)
      throw ValueError("apply_edit: interval edits require a continuous feature");
    if (shape.layout.separation_offset)
      throw ValueError("apply_edit: separated shapes cannot be edited");
    if (!(edit.lo < edit.hi)) throw ValueError("apply_edit: region requires lo < hi");

    split_at(shape, edit.lo);
    split_at(shape, edit.hi);

    BinLayout& layout = shape.layout;
    const int nv = static_cast<int>(layout.edges.size()) - 1;
    std::vector<int> affected;
    for (int b = 0; b < nv; ++b) {
      if (layout.edges[b] >= edit.lo && layout.edges[b + 1] <= edit.hi) affected.push_back(b);
    }
    const bool missing_in_region = layout.missing_bin && layout.sentinel &&
                                   *layout.sentinel >= edit.lo && *layout.sentinel <= edit.hi;
    if (affected.empty() && !missing_in_region)
      throw ValueError("apply_edit: region [" + std::to_string(edit.lo) + ", " +
                       std::to_string(edit.hi) + "] does not intersect the bins of " +
                       edit.feature);

    double value = edit.value;
    if (edit.action == EditAction::FlattenToBinOf) {
      value = shape.scores[layout.bin_of(edit.value, false)];
    }
    for (int b : affected) {
      if (edit.action == EditAction::ShiftBy) shape.scores[b] += value;
      else shape.scores[b] = value;
    }
    if (missing_in_region) {
      if (edit.action == EditAction::ShiftBy) shape.scores[*layout.missing_bin] += value;
      else shape.scores[*layout.missing_bin] = value;
    }
    touched.insert(edit.feature);

    resolved.push_back({{"feature", edit.feature},
                        {"region", {edit.lo, edit.hi}},
                        {"action", to_string(edit.action)},
                        {"value", edit.value},
                        {"applied_value", value}});
  }

  if (script.recenter) {
    for (const auto& name : touched) {
      ShapeFunction& shape = out.shapes[static_cast<std::size_t>(out.feature_index(name))];
      const double n = shape.layout.counts.sum();
      if (n <= 0)
        throw ValueError("apply_edit: cannot recenter " + name + " with zero total count");
      const double mu = shape.layout.counts.dot(shape.scores) / n;
      shape.scores.array() -= mu;
      out.intercept += mu;
    }
  }

  nlohmann::json entry = script.to_json();
  entry["resolved"] = std::move(resolved);
  out.edit_history.push_back(std::move(entry));
  return out;
}

namespace {

void diff_continuous(const ShapeFunction& a, const ShapeFunction& b, ModelDiff& diff) {
  const int nva = static_cast<int>(a.layout.edges.size()) - 1;
  const int nvb = static_cast<int>(b.layout.edges.size()) - 1;
  if (a.layout.edges[0] != b.layout.edges[0] || a.layout.edges[nva] != b.layout.edges[nvb])
    throw SchemaError("diff_models: value ranges differ for " + a.feature);
  if (a.layout.missing_bin.has_value() != b.layout.missing_bin.has_value())
    throw SchemaError("diff_models: missing-bin structure differs for " + a.feature);

  std::vector<double> edges;
  for (Eigen::Index i = 0; i < a.layout.edges.size(); ++i) edges.push_back(a.layout.edges[i]);
  for (Eigen::Index i = 0; i < b.layout.edges.size(); ++i) edges.push_back(b.layout.edges[i]);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double mid = edges[k] + 0.5 * (edges[k + 1] - edges[k]);
    const double sa = a.scores[a.layout.value_bin_of(mid)];
    const double sb = b.scores[b.layout.value_bin_of(mid)];
    if (std::abs(sa - sb) > 1e-12)
      diff.bins.push_back({a.feature, edges[k], edges[k + 1], false, sa, sb});
  }
  if (a.layout.missing_bin) {
    const double sa = a.scores[*a.layout.missing_bin];
    const double sb = b.scores[*b.layout.missing_bin];
    if (std::abs(sa - sb) > 1e-12) {
      const double s = a.layout.sentinel.value_or(0.0);
      diff.bins.push_back({a.feature, s, s, true, sa, sb});
    }
  }
}

}  // namespace

ModelDiff diff_models(const GamModel& a, const GamModel& b) {
  if (a.shapes.size() != b.shapes.size())
    throw SchemaError("diff_models: feature counts differ");
  ModelDiff diff;
  diff.intercept_before = a.intercept;
  diff.intercept_after = b.intercept;
  diff.intercept_changed = std::abs(a.intercept - b.intercept) > 1e-12;

  for (const auto& sa : a.shapes) {
    const int bi = b.feature_index(sa.feature);
    if (bi < 0) throw SchemaError("diff_models: feature " + sa.feature + " absent from b");
    const ShapeFunction& sb = b.shapes[static_cast<std::size_t>(bi)];
    if (sa.layout.categorical != sb.layout.categorical)
      throw SchemaError("diff_models: kind differs for " + sa.feature);
    if (sa.layout.categorical) {
      if (sa.layout.categories != sb.layout.categories)
        throw SchemaError("diff_models: category vocabularies differ for " + sa.feature);
      for (int c = 0; c < sa.layout.n_bins(); ++c) {
        if (std::abs(sa.scores[c] - sb.scores[c]) > 1e-12) {
          const bool is_missing = sa.layout.missing_bin && c == *sa.layout.missing_bin;
          diff.bins.push_back({sa.feature, static_cast<double>(c), static_cast<double>(c),
                               is_missing, sa.scores[c], sb.scores[c]});
        }
      }
    } else {
      diff_continuous(sa, sb, diff);
    }
  }
  return diff;
}

}  // namespace missinglens
