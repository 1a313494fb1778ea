#include "missinglens/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "missinglens/rng.hpp"
#include "missinglens/stats.hpp"
#include "missinglens/trees.hpp"

namespace missinglens {

std::string to_string(ImputeMethod m) {
  switch (m) {
    case ImputeMethod::Mean: return "mean";
    case ImputeMethod::Median: return "median";
    case ImputeMethod::Constant: return "constant";
    case ImputeMethod::Knn: return "knn";
    case ImputeMethod::IterativeForest: return "iterative_forest";
  }
  return "mean";
}

std::string to_string(AuditVerdict v) {
  switch (v) {
    case AuditVerdict::Harmful: return "harmful";
    case AuditVerdict::Harmless: return "harmless";
    case AuditVerdict::NotApplicable: return "not_applicable";
  }
  return "not_applicable";
}

namespace {

int mode_category(const Column& col) {
  std::map<int, Index> counts;
  for (Index i = 0; i < col.n(); ++i)
    if (!col.is_missing(i)) counts[static_cast<int>(col.values[i])] += 1;
  int best = 0;
  Index best_n = -1;
  for (const auto& [cat, c] : counts) {
    if (c > best_n) {
      best_n = c;
      best = cat;
    }
  }
  return best;
}

void fill_cells(Column& col, const std::vector<Index>& rows, const Eigen::VectorXd& values) {
  for (std::size_t k = 0; k < rows.size(); ++k) {
    col.values[rows[k]] = values[static_cast<Eigen::Index>(k)];
    col.missing[static_cast<std::size_t>(rows[k])] = 0;
  }
}

}  // namespace

ImputedTable impute_simple(const Table& table, std::string_view feature, ImputeMethod method,
                           double constant) {
  if (method != ImputeMethod::Mean && method != ImputeMethod::Median &&
      method != ImputeMethod::Constant)
    throw ValueError("impute_simple: method must be mean, median or constant");
  ImputedTable out;
  out.table = table;
  Column& col = out.table.column(feature);
  if (method != ImputeMethod::Constant && col.kind == ColumnKind::Categorical)
    throw ValueError("impute_simple: mean/median need a continuous column");

  std::vector<Index> rows;
  for (Index i = 0; i < col.n(); ++i)
    if (col.is_missing(i)) rows.push_back(i);
  if (rows.empty()) return out;

  double value = constant;
  if (method != ImputeMethod::Constant) {
    Eigen::VectorXd obs = col.observed_values();
    if (obs.size() == 0)
      throw ValueError("impute_simple: column " + col.name + " has no observed cells");
    value = method == ImputeMethod::Mean ? obs.mean() : median_of(obs);
  }

  ImputationRecord rec;
  rec.column = col.name;
  rec.method = to_string(method);
  rec.rows = rows;
  rec.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(rows.size()), value);
  fill_cells(col, rows, rec.values);
  out.records.push_back(std::move(rec));
  return out;
}

namespace {

struct Standardized {
  Eigen::MatrixXd z;      // standardized values, 0 where missing
  Eigen::MatrixXd miss;   // 1 where missing
  std::vector<bool> categorical;
};

Standardized standardize(const Table& table) {
  const Index n = table.n_rows;
  const int p = static_cast<int>(table.columns.size());
  Standardized s;
  s.z.setZero(n, p);
  s.miss.setZero(n, p);
  s.categorical.resize(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const Column& col = table.columns[static_cast<std::size_t>(j)];
    s.categorical[static_cast<std::size_t>(j)] = col.kind == ColumnKind::Categorical;
    if (col.kind == ColumnKind::Categorical) {
      for (Index i = 0; i < n; ++i) {
        s.miss(i, j) = col.is_missing(i) ? 1.0 : 0.0;
        s.z(i, j) = col.is_missing(i) ? 0.0 : col.values[i];
      }
      continue;
    }
    double mean = 0;
    Index m = 0;
    for (Index i = 0; i < n; ++i)
      if (!col.is_missing(i)) {
        mean += col.values[i];
        ++m;
      }
    mean = m > 0 ? mean / static_cast<double>(m) : 0.0;
    double var = 0;
    for (Index i = 0; i < n; ++i)
      if (!col.is_missing(i)) var += (col.values[i] - mean) * (col.values[i] - mean);
    const double sd = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 1.0;
    const double scale = sd > 0 ? sd : 1.0;
    for (Index i = 0; i < n; ++i) {
      s.miss(i, j) = col.is_missing(i) ? 1.0 : 0.0;
      s.z(i, j) = col.is_missing(i) ? 0.0 : (col.values[i] - mean) / scale;
    }
  }
  return s;
}

}  // namespace

ImputedTable impute_knn(const Table& table, int k, std::uint64_t seed) {
  (void)seed;  // KNN is deterministic; the parameter keeps the imputer API uniform
  const Index n = table.n_rows;
  if (k < 1) throw ValueError("impute_knn: K must be >= 1");
  if (k > n - 1) throw ValueError("impute_knn: K must be <= n_rows - 1");

  ImputedTable out;
  out.table = table;
  const Standardized s = standardize(table);
  const int p = static_cast<int>(table.columns.size());

  std::vector<Index> rows_with_missing;
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      if (s.miss(i, j) > 0) {
        rows_with_missing.push_back(i);
        break;
      }
    }
  }

  std::vector<std::vector<std::pair<double, Index>>> neighbor_cache(
      static_cast<std::size_t>(n));
  auto distances_of = [&](Index r) -> const std::vector<std::pair<double, Index>>& {
    auto& cached = neighbor_cache[static_cast<std::size_t>(r)];
    if (!cached.empty()) return cached;
    cached.reserve(static_cast<std::size_t>(n - 1));
    for (Index o = 0; o < n; ++o) {
      if (o == r) continue;
      double sq = 0;
      int shared = 0;
      for (int j = 0; j < p; ++j) {
        if (s.miss(r, j) > 0 || s.miss(o, j) > 0) continue;
        ++shared;
        double d;
        if (s.categorical[static_cast<std::size_t>(j)]) {
          d = s.z(r, j) == s.z(o, j) ? 0.0 : 1.0;
        } else {
          d = s.z(r, j) - s.z(o, j);
        }
        sq += d * d;
      }
      const double dist = shared > 0 ? std::sqrt(sq) / static_cast<double>(shared)
                                     : std::numeric_limits<double>::infinity();
      cached.emplace_back(dist, o);
    }
    std::sort(cached.begin(), cached.end());
    return cached;
  };

  std::map<std::string, ImputationRecord> records;
  for (Index r : rows_with_missing) {
    const auto& ranked = distances_of(r);
    for (int j = 0; j < p; ++j) {
      if (s.miss(r, j) == 0) continue;
      const Column& col = table.columns[static_cast<std::size_t>(j)];
      std::vector<Index> donors;
      for (const auto& [dist, o] : ranked) {
        if (!std::isfinite(dist)) break;
        if (s.miss(o, j) > 0) continue;
        donors.push_back(o);
        if (static_cast<int>(donors.size()) == k) break;
      }
      double value;
      bool fallback = false;
      if (donors.empty()) {
        fallback = true;
        value = col.kind == ColumnKind::Categorical
                    ? static_cast<double>(mode_category(col))
                    : col.observed_values().mean();
      } else if (col.kind == ColumnKind::Categorical) {
        std::map<int, int> votes;
        for (auto o : donors) votes[static_cast<int>(col.values[o])] += 1;
        int best = 0, best_n = -1;
        for (const auto& [cat, c] : votes)
          if (c > best_n) {
            best_n = c;
            best = cat;
          }
        value = static_cast<double>(best);
      } else {
        double sum = 0;
        for (auto o : donors) sum += col.values[o];
        value = sum / static_cast<double>(donors.size());
      }
      auto& rec = records[col.name];
      rec.column = col.name;
      rec.method = "knn";
      rec.rows.push_back(r);
      rec.values.conservativeResize(rec.values.size() + 1);
      rec.values[rec.values.size() - 1] = value;
      rec.fallback = rec.fallback || fallback;
    }
  }

  for (auto& [name, rec] : records) {
    fill_cells(out.table.column(name), rec.rows, rec.values);
    out.records.push_back(rec);
  }
  return out;
}

ImputedTable impute_iterative_forest(const Table& table, const ImputerConfig& config) {
  const Index n = table.n_rows;
  const int p = static_cast<int>(table.columns.size());
  if (p < 2) throw ValueError("impute_iterative_forest: need at least 2 features");
  if (config.max_iter < 1) throw ValueError("impute_iterative_forest: max_iter must be >= 1");

  ImputedTable out;
  out.table = table;

  // features with missing cells, visited by ascending missing rate
  std::vector<std::pair<double, int>> order;
  for (int j = 0; j < p; ++j) {
    const Column& col = table.columns[static_cast<std::size_t>(j)];
    const Index miss = col.n_missing();
    if (miss > 0)
      order.emplace_back(static_cast<double>(miss) / static_cast<double>(n), j);
  }
  if (order.empty()) return out;
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  // initial guess: mean / mode
  for (auto& [rate, j] : order) {
    Column& col = out.table.columns[static_cast<std::size_t>(j)];
    if (col.n_observed() == 0)
      throw ValueError("impute_iterative_forest: column " + col.name + " is entirely missing");
    const double fill = col.kind == ColumnKind::Categorical
                            ? static_cast<double>(mode_category(col))
                            : col.observed_values().mean();
    for (Index i = 0; i < n; ++i) {
      if (col.is_missing(i)) col.values[i] = fill;
    }
  }

  std::vector<bool> categorical(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j)
    categorical[static_cast<std::size_t>(j)] =
        table.columns[static_cast<std::size_t>(j)].kind == ColumnKind::Categorical;

  auto matrix_without = [&](const Table& t, int skip) {
    Eigen::MatrixXd X(n, p - 1);
    std::vector<bool> cat;
    int w = 0;
    for (int j = 0; j < p; ++j) {
      if (j == skip) continue;
      X.col(w) = t.columns[static_cast<std::size_t>(j)].values;
      cat.push_back(categorical[static_cast<std::size_t>(j)]);
      ++w;
    }
    return std::make_pair(X, cat);
  };

  Table current = out.table;  // masks still true on originally-missing cells
  double prev_delta = std::numeric_limits<double>::infinity();
  int kept_sweeps = 0;

  const Rng master(config.seed);
  for (int sweep = 0; sweep < config.max_iter; ++sweep) {
    Table next = current;
    for (std::size_t fi = 0; fi < order.size(); ++fi) {
      const int j = order[fi].second;
      Column& col = next.columns[static_cast<std::size_t>(j)];
      auto [X, cat] = matrix_without(next, j);

      std::vector<Index> train_rows, miss_rows;
      for (Index i = 0; i < n; ++i)
        (col.is_missing(i) ? miss_rows : train_rows).push_back(i);

      Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train_rows.size()), p - 1);
      Eigen::VectorXd ytr(static_cast<Eigen::Index>(train_rows.size()));
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
        ytr[static_cast<Eigen::Index>(i)] = col.values[train_rows[i]];
      }

      ForestConfig fc;
      fc.n_trees = config.n_trees;
      fc.seed = master.child(static_cast<std::uint64_t>(sweep) * static_cast<std::uint64_t>(p) +
                             static_cast<std::uint64_t>(j))
                    .next_u64();
      fc.categorical_target = categorical[static_cast<std::size_t>(j)];
      fc.n_threads = config.n_threads;
      RandomForest forest = fit_random_forest(Xtr, ytr, cat, fc);

      for (auto i : miss_rows) col.values[i] = forest.predict_row(X.row(i));
    }

    // MissForest stopping rule: normalized change vs the previous sweep
    double num_cont = 0, den_cont = 0;
    double changed_cat = 0, total_cat = 0;
    for (auto& [rate, j] : order) {
      const Column& a = next.columns[static_cast<std::size_t>(j)];
      const Column& b = current.columns[static_cast<std::size_t>(j)];
      for (Index i = 0; i < n; ++i) {
        if (!a.is_missing(i)) continue;  // mask marks originally-missing cells
        if (categorical[static_cast<std::size_t>(j)]) {
          total_cat += 1;
          changed_cat += a.values[i] != b.values[i] ? 1 : 0;
        } else {
          const double d = a.values[i] - b.values[i];
          num_cont += d * d;
          den_cont += a.values[i] * a.values[i];
        }
      }
    }
    double delta = 0;
    if (den_cont > 0) delta += num_cont / den_cont;
    if (total_cat > 0) delta += changed_cat / total_cat;

    if (delta >= prev_delta) {
      // difference increased: keep the previous sweep's values
      out.table = current;
      out.sweeps = kept_sweeps;
      break;
    }
    current = next;
    prev_delta = delta;
    kept_sweeps = sweep + 1;
    out.table = current;
    out.sweeps = kept_sweeps;
  }

  // clear masks and record provenance
  for (auto& [rate, j] : order) {
    Column& col = out.table.columns[static_cast<std::size_t>(j)];
    ImputationRecord rec;
    rec.column = col.name;
    rec.method = "iterative_forest";
    for (Index i = 0; i < n; ++i) {
      if (col.is_missing(i)) {
        rec.rows.push_back(i);
      }
    }
    rec.values.resize(static_cast<Eigen::Index>(rec.rows.size()));
    for (std::size_t i = 0; i < rec.rows.size(); ++i)
      rec.values[static_cast<Eigen::Index>(i)] = col.values[rec.rows[i]];
    for (auto i : rec.rows) col.missing[static_cast<std::size_t>(i)] = 0;
    out.records.push_back(std::move(rec));
  }
  return out;
}

Eigen::VectorXd second_order_diff(const ShapeFunction& shape) {
  const BinLayout& layout = shape.layout;
  if (layout.categorical) throw ValueError("second_order_diff: continuous shapes only");
  const int nb = static_cast<int>(layout.edges.size()) - 1;
  if (nb < 3) throw ValueError("second_order_diff: need at least 3 value bins");

  Eigen::VectorXd out(nb - 2);
  for (int k = 1; k + 1 <= nb - 1; ++k) {
    const double f0 = shape.scores[k - 1], f1 = shape.scores[k], f2 = shape.scores[k + 1];
    const double h0 = layout.edges[k] - layout.edges[k - 1];
    const double h1 = layout.edges[k + 1] - layout.edges[k];
    const double h2 = layout.edges[k + 2] - layout.edges[k + 1];
    const double fwd = (f2 - f1) / ((h2 + h1) / 2.0);
    const double bwd = (f1 - f0) / ((h1 + h0) / 2.0);
    out[k - 1] = (fwd - bwd) / (h1 + h2 / 2.0 + h0 / 2.0);
  }
  return out;
}

std::vector<SpikeAudit> audit_imputation(const GamModel& model, const Table& table,
                                         AuditStatistic statistic, double contamination,
                                         std::uint64_t seed) {
  if (contamination <= 0 || contamination >= 1)
    throw ValueError("audit_imputation: contamination must be in (0,1)");

  struct Entry {
    int shape_index;
    int n_interior;
    Eigen::VectorXd diffs;
  };
  std::vector<Entry> eligible;
  std::vector<double> pooled;
  for (std::size_t si = 0; si < model.shapes.size(); ++si) {
    const ShapeFunction& shape = model.shapes[si];
    if (shape.layout.categorical) continue;
    const int nb = static_cast<int>(shape.layout.edges.size()) - 1;
    if (nb < 3) continue;
    Entry e;
    e.shape_index = static_cast<int>(si);
    e.diffs = second_order_diff(shape);
    e.n_interior = static_cast<int>(e.diffs.size());
    for (Eigen::Index k = 0; k < e.diffs.size(); ++k) pooled.push_back(e.diffs[k]);
    eligible.push_back(std::move(e));
  }

  std::vector<SpikeAudit> audits;
  Eigen::VectorXd pool_scores;
  double threshold = std::numeric_limits<double>::infinity();
  if (!pooled.empty()) {
    Eigen::MatrixXd points(static_cast<Eigen::Index>(pooled.size()), 1);
    for (std::size_t i = 0; i < pooled.size(); ++i)
      points(static_cast<Eigen::Index>(i), 0) = pooled[i];
    IsolationForest forest = fit_isolation_forest(points, 100, 256, seed);
    pool_scores = forest.anomaly_scores(points);
    Eigen::VectorXd sorted = pool_scores;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    threshold = quantile_sorted(sorted, 1.0 - contamination);
  }

  Eigen::Index pool_pos = 0;
  for (const auto& shape : model.shapes) {
    if (shape.layout.categorical) continue;
    SpikeAudit audit;
    audit.feature = shape.feature;
    audit.contamination = contamination;

    const int nb = static_cast<int>(shape.layout.edges.size()) - 1;
    if (nb < 3) {
      audit.verdict = AuditVerdict::NotApplicable;
      audits.push_back(std::move(audit));
      continue;
    }

    audit.bin_diffs = second_order_diff(shape);
    audit.anomaly_scores = pool_scores.segment(pool_pos, audit.bin_diffs.size());
    pool_pos += audit.bin_diffs.size();
    for (Eigen::Index k = 0; k < audit.anomaly_scores.size(); ++k) {
      if (audit.anomaly_scores[k] >= threshold)
        audit.flagged_bins.push_back(static_cast<int>(k) + 1);  // value-bin index
    }

    const ColumnStats stats = column_stats(table, shape.feature);
    if (!stats.defined) {
      audit.verdict = AuditVerdict::NotApplicable;
      audits.push_back(std::move(audit));
      continue;
    }
    audit.mean_value = stats.mean;
    audit.median_value = stats.median;
    audit.mean_bin = shape.layout.value_bin_of(stats.mean);
    audit.median_bin = shape.layout.value_bin_of(stats.median);

    const int probe = statistic == AuditStatistic::Mean ? audit.mean_bin : audit.median_bin;
    const bool hit = std::find(audit.flagged_bins.begin(), audit.flagged_bins.end(), probe) !=
                     audit.flagged_bins.end();
    audit.verdict = hit ? AuditVerdict::Harmful : AuditVerdict::Harmless;
    audits.push_back(std::move(audit));
  }
  return audits;
}

}  // namespace missinglens
