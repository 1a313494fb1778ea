#include "missinglens/table.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "missinglens/stats.hpp"

namespace missinglens {

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Binary: return "binary";
  }
  return "continuous";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "continuous") return ColumnKind::Continuous;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "binary") return ColumnKind::Binary;
  throw ValueError("unknown column kind: " + std::string(s));
}

Index Column::n_missing() const {
  Index count = 0;
  for (auto m : missing) count += (m != 0);
  return count;
}

Eigen::VectorXd Column::observed_values() const {
  Eigen::VectorXd out(n_observed());
  Index k = 0;
  for (Index i = 0; i < n(); ++i) {
    if (!is_missing(i)) out[k++] = values[i];
  }
  return out;
}

bool Table::has_column(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return true;
  }
  return false;
}

int Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  throw SchemaError("no such column: " + std::string(name));
}

const Column& Table::column(std::string_view name) const {
  return columns[static_cast<std::size_t>(column_index(name))];
}

Column& Table::column(std::string_view name) {
  return columns[static_cast<std::size_t>(column_index(name))];
}

void Table::validate() const {
  std::set<std::string> names;
  for (const auto& c : columns) {
    if (!names.insert(c.name).second) throw SchemaError("duplicate column name: " + c.name);
    if (c.values.size() != n_rows || static_cast<Index>(c.missing.size()) != n_rows)
      throw SchemaError("column " + c.name + " length differs from n_rows");
    for (Index i = 0; i < n_rows; ++i) {
      if (!c.is_missing(i) && c.kind != ColumnKind::Categorical && !std::isfinite(c.values[i]))
        throw SchemaError("column " + c.name + " has a non-finite observed cell");
      if (c.kind == ColumnKind::Categorical && !c.is_missing(i)) {
        const auto idx = static_cast<std::ptrdiff_t>(c.values[i]);
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(c.categories.size()))
          throw SchemaError("column " + c.name + " has an out-of-vocabulary category index");
      }
    }
  }
  if (target_index &&
      (*target_index < 0 || *target_index >= static_cast<int>(columns.size())))
    throw SchemaError("target_index out of range");
}

Table encode_missing(const Table& table, std::string_view column, const MissingEncoding& enc) {
  Table out = table;
  Column& col = out.column(column);
  const Index n_miss = col.n_missing();

  if (col.kind == ColumnKind::Categorical || enc.strategy == MissingStrategy::SeparateCategory) {
    if (col.kind != ColumnKind::Categorical)
      throw ValueError("separate-category encoding requires a categorical column");
    if (n_miss == 0) return out;  // nothing to encode, metadata untouched
    int cat = -1;
    for (std::size_t i = 0; i < col.categories.size(); ++i) {
      if (col.categories[i] == "<missing>") cat = static_cast<int>(i);
    }
    if (cat < 0) {
      cat = static_cast<int>(col.categories.size());
      col.categories.push_back("<missing>");
    }
    for (Index i = 0; i < col.n(); ++i) {
      if (col.is_missing(i)) {
        col.values[i] = static_cast<double>(cat);
        col.missing[static_cast<std::size_t>(i)] = 0;
      }
    }
    col.missing_category = cat;
    return out;
  }

  if (n_miss == 0) return out;  // identity: metadata notes no sentinel used

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < col.n(); ++i) {
    if (!col.is_missing(i)) {
      lo = std::min(lo, col.values[i]);
      hi = std::max(hi, col.values[i]);
    }
  }
  if (!std::isfinite(lo)) throw ValueError("encode_missing: column has no observed values");

  double sentinel = 0;
  if (enc.strategy == MissingStrategy::SentinelFixed) {
    sentinel = enc.value;
    if (sentinel >= lo && sentinel <= hi)
      throw ValueError("sentinel value lies inside the observed range and would alias real values");
  } else {
    const double range = hi - lo;
    sentinel = lo - 0.05 * (range > 0 ? range : 1.0);
  }

  for (Index i = 0; i < col.n(); ++i) {
    if (col.is_missing(i)) {
      col.values[i] = sentinel;
      col.missing[static_cast<std::size_t>(i)] = 0;
    }
  }
  col.sentinel = sentinel;
  if (col.kind == ColumnKind::Binary) col.kind = ColumnKind::Continuous;
  return out;
}

Column missingness_indicator(const Table& table, std::string_view column) {
  const Column& col = table.column(column);
  Column out;
  out.name = std::string(column) + "__missing";
  out.kind = ColumnKind::Binary;
  out.values.resize(col.n());
  out.missing.assign(static_cast<std::size_t>(col.n()), 0);
  for (Index i = 0; i < col.n(); ++i) out.values[i] = col.is_missing(i) ? 1.0 : 0.0;
  return out;
}

ColumnStats column_stats(const Table& table, std::string_view column) {
  const Column& col = table.column(column);
  if (col.kind == ColumnKind::Categorical)
    throw ValueError("column_stats requires a continuous column");
  ColumnStats stats;
  const Index n = col.n();
  stats.missing_rate = n == 0 ? 0.0 : static_cast<double>(col.n_missing()) / static_cast<double>(n);
  Eigen::VectorXd obs = col.observed_values();
  if (obs.size() == 0) {
    stats.defined = false;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    stats.mean = stats.median = stats.min = stats.max = nan;
    return stats;
  }
  stats.defined = true;
  stats.mean = obs.mean();
  stats.median = median_of(obs);
  stats.min = obs.minCoeff();
  stats.max = obs.maxCoeff();
  return stats;
}

}  // namespace missinglens
