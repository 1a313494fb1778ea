#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "missinglens/error.hpp"

namespace missinglens {

using Index = Eigen::Index;

enum class ColumnKind { Continuous, Categorical, Binary };

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

// One column of a Table. Continuous/binary cells live in `values`; categorical
// cells hold an index into `categories` (ordered by first appearance).
// missing[i] is true iff values[i] carries no observed value; such cells hold
// NaN so accidental use is loud.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> missing;
  std::vector<std::string> categories;

  // Set by encode_missing: sentinel value (continuous) or the index of the
  // dedicated missing category (categorical). Downstream binning uses these to
  // place encoded cells in the missing bin.
  std::optional<double> sentinel;
  std::optional<int> missing_category;

  Index n() const { return values.size(); }
  bool is_missing(Index i) const { return missing[static_cast<std::size_t>(i)] != 0; }
  Index n_missing() const;
  Index n_observed() const { return n() - n_missing(); }

  // Observed values only (mask-true cells dropped; sentinel cells kept).
  Eigen::VectorXd observed_values() const;
};

struct ColumnStats {
  double mean = 0, median = 0, min = 0, max = 0;
  double missing_rate = 0;
  bool defined = false;  // false when there are no observed cells
};

struct Table {
  std::vector<Column> columns;
  Index n_rows = 0;
  std::optional<int> target_index;

  bool has_column(std::string_view name) const;
  int column_index(std::string_view name) const;  // SchemaError if absent
  const Column& column(std::string_view name) const;
  Column& column(std::string_view name);

  // Checks the structural invariants (uniform length, unique names, valid
  // target index, mask/NaN agreement). Throws SchemaError on violation.
  void validate() const;
};

enum class MissingStrategy { SentinelBelowMin, SentinelFixed, SeparateCategory };

struct MissingEncoding {
  MissingStrategy strategy = MissingStrategy::SentinelBelowMin;
  double value = 0.0;  // used by SentinelFixed

  static MissingEncoding sentinel_below_min() { return {MissingStrategy::SentinelBelowMin, 0.0}; }
  static MissingEncoding sentinel_fixed(double v) { return {MissingStrategy::SentinelFixed, v}; }
  static MissingEncoding separate_category() { return {MissingStrategy::SeparateCategory, 0.0}; }
};

// Replaces missing cells of one column with a sentinel (or dedicated category),
// clears the mask, and records the sentinel in the column metadata. The auto
// sentinel is min - 0.05*(max - min), strictly below the observed range.
Table encode_missing(const Table& table, std::string_view column, const MissingEncoding& enc);

// 0/1 indicator column, 1 where the mask is true.
Column missingness_indicator(const Table& table, std::string_view column);

// Statistics over observed cells only.
ColumnStats column_stats(const Table& table, std::string_view column);

}  // namespace missinglens
