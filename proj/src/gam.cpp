#include "missinglens/gam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "missinglens/parallel.hpp"
#include "missinglens/rng.hpp"
#include "missinglens/stats.hpp"

namespace missinglens {

std::string to_string(Link link) {
  return link == Link::Identity ? "identity" : "logistic";
}

Link link_from_string(std::string_view s) {
  if (s == "identity") return Link::Identity;
  if (s == "logistic") return Link::Logistic;
  throw ValueError("unknown link: " + std::string(s));
}

int BinLayout::n_value_bins() const {
  if (categorical) return n_bins() - (missing_bin ? 1 : 0);
  int n = static_cast<int>(edges.size()) - 1;
  if (separation_offset) n += static_cast<int>(imputed_edges.size()) - 1;
  return n;
}

int BinLayout::value_bin_of(double x) const {
  // (lo, hi] with clamping into the edge bins.
  const auto search = [](const Eigen::VectorXd& e, double v) {
    const int nb = static_cast<int>(e.size()) - 1;
    if (v <= e[0]) return 0;
    if (v > e[nb]) return nb - 1;
    const double* first = e.data();
    const double* it = std::lower_bound(first, first + e.size(), v);
    return static_cast<int>(std::max<std::ptrdiff_t>(1, it - first)) - 1;
  };
  if (categorical) throw ValueError("value_bin_of: categorical layout");
  if (separation_offset && x > edges[edges.size() - 1]) {
    const int base = static_cast<int>(edges.size()) - 1;
    return base + search(imputed_edges, x - *separation_offset);
  }
  return search(edges, x);
}

int BinLayout::bin_of(double value, bool missing) const {
  if (missing) {
    if (missing_bin) return *missing_bin;
    throw ValueError("bin_of: missing value but the layout has no missing bin");
  }
  if (categorical) {
    const int cat = static_cast<int>(value);
    if (cat < 0 || cat >= static_cast<int>(categories.size()))
      return missing_bin ? *missing_bin : 0;
    return cat;
  }
  if (sentinel && value == *sentinel && missing_bin) return *missing_bin;
  return value_bin_of(value);
}

double BinLayout::lo(int bin) const {
  if (categorical) throw ValueError("lo: categorical layout");
  const int n_obs = static_cast<int>(edges.size()) - 1;
  if (separation_offset && bin >= n_obs && bin < n_value_bins())
    return imputed_edges[bin - n_obs] + *separation_offset;
  if (missing_bin && bin == *missing_bin) return sentinel.value_or(edges[0]);
  return edges[bin];
}

double BinLayout::hi(int bin) const {
  if (categorical) throw ValueError("hi: categorical layout");
  const int n_obs = static_cast<int>(edges.size()) - 1;
  if (separation_offset && bin >= n_obs && bin < n_value_bins())
    return imputed_edges[bin - n_obs + 1] + *separation_offset;
  if (missing_bin && bin == *missing_bin) return sentinel.value_or(edges[0]);
  return edges[bin + 1];
}

namespace {

// Quantile edges over values, deduplicated; degenerate inputs widen to one bin.
Eigen::VectorXd quantile_edges(Eigen::VectorXd values, int max_bins) {
  std::sort(values.data(), values.data() + values.size());
  std::vector<double> edges;
  for (int k = 0; k <= max_bins; ++k) {
    const double q = quantile_sorted(values, static_cast<double>(k) / max_bins);
    if (edges.empty() || q > edges.back()) edges.push_back(q);
  }
  if (edges.size() < 2) {
    const double v = edges.empty() ? 0.0 : edges[0];
    edges = {v - 0.5, v + 0.5};
  }
  return Eigen::Map<Eigen::VectorXd>(edges.data(), static_cast<Eigen::Index>(edges.size()));
}

}  // namespace

BinLayout build_bins(const Column& column, int max_bins) {
  if (max_bins < 2) throw ValueError("build_bins: max_bins must be >= 2");
  BinLayout layout;
  const Index n = column.n();

  if (column.kind == ColumnKind::Categorical) {
    layout.categorical = true;
    layout.categories = column.categories;
    int n_bins = static_cast<int>(column.categories.size());
    if (column.missing_category) {
      layout.missing_bin = *column.missing_category;
    } else if (column.n_missing() > 0) {
      layout.categories.push_back("<missing>");
      layout.missing_bin = n_bins;
      ++n_bins;
    }
    if (n_bins == 0) throw ValueError("build_bins: column has no observed values");
    layout.counts = Eigen::VectorXd::Zero(n_bins);
    for (Index i = 0; i < n; ++i)
      layout.counts[layout.bin_of(column.values[i], column.is_missing(i))] += 1.0;
    return layout;
  }

  // Continuous: quantile bins over plain observed values; sentinel-encoded and
  // masked cells go to the dedicated missing bin.
  std::vector<double> obs;
  obs.reserve(static_cast<std::size_t>(n));
  Index n_special = 0;
  for (Index i = 0; i < n; ++i) {
    if (column.is_missing(i)) {
      ++n_special;
    } else if (column.sentinel && column.values[i] == *column.sentinel) {
      ++n_special;
    } else {
      obs.push_back(column.values[i]);
    }
  }
  if (obs.empty()) throw ValueError("build_bins: column has no observed values");

  Eigen::VectorXd obs_v = Eigen::Map<Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  layout.edges = quantile_edges(obs_v, max_bins);
  layout.sentinel = column.sentinel;

  // Drop edges that produce empty bins (duplicate-heavy data).
  while (true) {
    const int nb = static_cast<int>(layout.edges.size()) - 1;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(nb);
    for (double v : obs) counts[layout.value_bin_of(v)] += 1.0;
    int empty = -1;
    for (int k = 0; k < nb; ++k) {
      if (counts[k] == 0) {
        empty = k;
        break;
      }
    }
    if (empty < 0 || nb <= 1) {
      const bool want_missing = n_special > 0;
      layout.counts.resize(nb + (want_missing ? 1 : 0));
      layout.counts.head(nb) = counts;
      if (want_missing) {
        layout.missing_bin = nb;
        layout.counts[nb] = static_cast<double>(n_special);
      }
      break;
    }
    // remove the shared edge between bin `empty` and its neighbor
    Eigen::VectorXd next(layout.edges.size() - 1);
    int w = 0;
    for (int e = 0; e < layout.edges.size(); ++e) {
      if (e == empty + (empty == 0 ? 1 : 0)) continue;  // keep outermost edges
      next[w++] = layout.edges[e];
    }
    layout.edges = next;
  }
  return layout;
}

int GamModel::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].feature == name) return static_cast<int>(i);
  }
  return -1;
}

const ShapeFunction& GamModel::shape(std::string_view name) const {
  const int idx = feature_index(name);
  if (idx < 0) throw SchemaError("model has no feature: " + std::string(name));
  return shapes[static_cast<std::size_t>(idx)];
}

double gam_loss(Link link, const Eigen::VectorXd& scores, const Eigen::VectorXd& y) {
  const Eigen::Index n = scores.size();
  if (n == 0) return 0.0;
  double total = 0;
  if (link == Link::Identity) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = scores[i] - y[i];
      total += d * d;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = std::clamp(sigmoid(scores[i]), 1e-6, 1.0 - 1e-6);
      total += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
  }
  return total / static_cast<double>(n);
}

namespace {

struct Prepared {
  std::vector<std::string> names;
  std::vector<BinLayout> layouts;
  std::vector<Eigen::VectorXi> bins;  // per feature, length n
  Eigen::Index n = 0;
};

Prepared prepare_features(const Table& table, std::string_view target, int max_bins) {
  Prepared pf;
  pf.n = table.n_rows;
  for (const auto& col : table.columns) {
    if (col.name == target) continue;
    BinLayout layout = build_bins(col, max_bins);
    Eigen::VectorXi idx(table.n_rows);
    for (Index i = 0; i < table.n_rows; ++i)
      idx[i] = layout.bin_of(col.values[i], col.is_missing(i));
    pf.names.push_back(col.name);
    pf.layouts.push_back(std::move(layout));
    pf.bins.push_back(std::move(idx));
  }
  if (pf.names.empty()) throw ValueError("fit_gam: no feature columns");
  return pf;
}

// Depth-restricted regression tree over the ordered bin axis, fit to
// per-bin gradient sums S and weights W. Returns the leaf mean per bin.
void bin_tree_leaves(const Eigen::VectorXd& S, const Eigen::VectorXd& W, int lo, int hi, int depth,
                     double min_leaf, Eigen::VectorXd& out) {
  double St = 0, Wt = 0;
  for (int k = lo; k < hi; ++k) {
    St += S[k];
    Wt += W[k];
  }
  const double mean = Wt > 0 ? St / Wt : 0.0;
  if (depth == 0 || hi - lo <= 1 || Wt < 2 * min_leaf) {
    for (int k = lo; k < hi; ++k) out[k] = mean;
    return;
  }
  int best_t = -1;
  double best_gain = 1e-12;
  double Sl = 0, Wl = 0;
  for (int t = lo + 1; t < hi; ++t) {
    Sl += S[t - 1];
    Wl += W[t - 1];
    const double Wr = Wt - Wl;
    if (Wl < min_leaf || Wr < min_leaf) continue;
    const double Sr = St - Sl;
    const double gain = Sl * Sl / Wl + Sr * Sr / Wr - St * St / Wt;
    if (gain > best_gain + 1e-12) {
      best_gain = gain;
      best_t = t;
    }
  }
  if (best_t < 0) {
    for (int k = lo; k < hi; ++k) out[k] = mean;
    return;
  }
  bin_tree_leaves(S, W, lo, best_t, depth - 1, min_leaf, out);
  bin_tree_leaves(S, W, best_t, hi, depth - 1, min_leaf, out);
}

// Ordinal axis for boosting: missing bin first, then value bins in order.
std::vector<int> ordinal_bins(const BinLayout& layout) {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(layout.n_bins()));
  if (layout.missing_bin) order.push_back(*layout.missing_bin);
  for (int b = 0; b < layout.n_bins(); ++b) {
    if (layout.missing_bin && b == *layout.missing_bin) continue;
    order.push_back(b);
  }
  return order;
}

struct BagResult {
  std::vector<Eigen::VectorXd> theta;
};

BagResult train_bag(const Eigen::VectorXd& y, Link link, const Prepared& pf, const GamConfig& cfg,
                    std::uint64_t bag, double intercept, TrainTrace* trace) {
  const Eigen::Index n = pf.n;
  const int p = static_cast<int>(pf.names.size());
  Rng rng = Rng(cfg.seed).child(bag);

  // holdout split (stratified for logistic so both classes stay represented)
  std::vector<Eigen::Index> val_rows, pool;
  if (cfg.holdout_fraction > 0) {
    auto take = [&](std::vector<Eigen::Index>& rows) {
      rng.shuffle(rows);
      const auto k = static_cast<std::size_t>(
          std::llround(cfg.holdout_fraction * static_cast<double>(rows.size())));
      for (std::size_t i = 0; i < rows.size(); ++i)
        (i < k ? val_rows : pool).push_back(rows[i]);
    };
    if (link == Link::Logistic) {
      std::vector<Eigen::Index> pos, neg;
      for (Eigen::Index i = 0; i < n; ++i) (y[i] > 0.5 ? pos : neg).push_back(i);
      take(pos);
      take(neg);
    } else {
      std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      take(all);
    }
  } else {
    pool.resize(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (cfg.bootstrap) {
    for (std::size_t d = 0; d < pool.size(); ++d)
      w[pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))]] += 1.0;
  } else {
    for (auto i : pool) w[i] = 1.0;
  }
  std::vector<Eigen::Index> train_rows;
  for (auto i : pool)
    if (w[i] > 0) train_rows.push_back(i);

  // per-feature constant bin weights and ordinal maps
  std::vector<Eigen::VectorXd> bin_w(static_cast<std::size_t>(p));
  std::vector<std::vector<int>> ords(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const auto& layout = pf.layouts[static_cast<std::size_t>(j)];
    bin_w[static_cast<std::size_t>(j)] = Eigen::VectorXd::Zero(layout.n_bins());
    for (auto i : train_rows) bin_w[static_cast<std::size_t>(j)][pf.bins[static_cast<std::size_t>(j)][i]] += w[i];
    ords[static_cast<std::size_t>(j)] = ordinal_bins(layout);
  }

  std::vector<Eigen::VectorXd> theta(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j)
    theta[static_cast<std::size_t>(j)] =
        Eigen::VectorXd::Zero(pf.layouts[static_cast<std::size_t>(j)].n_bins());

  Eigen::VectorXd score = Eigen::VectorXd::Constant(n, intercept);

  auto val_loss = [&]() {
    if (val_rows.empty()) return 0.0;
    Eigen::VectorXd s(static_cast<Eigen::Index>(val_rows.size()));
    Eigen::VectorXd t(static_cast<Eigen::Index>(val_rows.size()));
    for (std::size_t i = 0; i < val_rows.size(); ++i) {
      s[static_cast<Eigen::Index>(i)] = score[val_rows[i]];
      t[static_cast<Eigen::Index>(i)] = y[val_rows[i]];
    }
    return gam_loss(link, s, t);
  };
  auto train_loss = [&]() {
    double total = 0, wt = 0;
    for (auto i : train_rows) {
      if (link == Link::Identity) {
        const double d = score[i] - y[i];
        total += w[i] * d * d;
      } else {
        const double pr = std::clamp(sigmoid(score[i]), 1e-6, 1.0 - 1e-6);
        total += w[i] * -(y[i] * std::log(pr) + (1.0 - y[i]) * std::log(1.0 - pr));
      }
      wt += w[i];
    }
    return wt > 0 ? total / wt : 0.0;
  };

  std::vector<Eigen::VectorXd> best_theta = theta;
  double best_loss = val_rows.empty() ? std::numeric_limits<double>::infinity() : val_loss();
  int since_best = 0;

  Eigen::VectorXd S, leaves, delta;
  for (int cycle = 0; cycle < cfg.rounds; ++cycle) {
    for (int j = 0; j < p; ++j) {
      const auto& bins = pf.bins[static_cast<std::size_t>(j)];
      const auto& ord = ords[static_cast<std::size_t>(j)];
      const int nb = pf.layouts[static_cast<std::size_t>(j)].n_bins();

      S.setZero(nb);
      if (link == Link::Identity) {
        for (auto i : train_rows) S[bins[i]] += w[i] * (y[i] - score[i]);
      } else {
        for (auto i : train_rows) {
          const double pr = std::clamp(sigmoid(score[i]), 1e-6, 1.0 - 1e-6);
          S[bins[i]] += w[i] * (y[i] - pr);
        }
      }

      // reorder to the ordinal axis, fit the tree, map increments back
      Eigen::VectorXd S_ord(nb), W_ord(nb);
      for (int k = 0; k < nb; ++k) {
        S_ord[k] = S[ord[static_cast<std::size_t>(k)]];
        W_ord[k] = bin_w[static_cast<std::size_t>(j)][ord[static_cast<std::size_t>(k)]];
      }
      leaves.setZero(nb);
      bin_tree_leaves(S_ord, W_ord, 0, nb, cfg.depth, cfg.min_leaf, leaves);
      delta.setZero(nb);
      for (int k = 0; k < nb; ++k)
        delta[ord[static_cast<std::size_t>(k)]] = cfg.learning_rate * leaves[k];

      theta[static_cast<std::size_t>(j)] += delta;
      for (auto i : train_rows) score[i] += delta[bins[i]];
      for (auto i : val_rows) score[i] += delta[bins[i]];
    }

    if (trace) {
      trace->train_loss.push_back(train_loss());
      if (!val_rows.empty()) trace->holdout_loss.push_back(val_loss());
    }
    if (!val_rows.empty()) {
      const double vl = val_loss();
      if (vl < best_loss - 1e-12) {
        best_loss = vl;
        best_theta = theta;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }

  BagResult result;
  result.theta = val_rows.empty() ? std::move(theta) : std::move(best_theta);
  return result;
}

GamModel train_core(std::string_view target, const Eigen::VectorXd& y, Link link,
                    const Prepared& pf, const GamConfig& cfg, TrainTrace* trace) {
  const Eigen::Index n = pf.n;
  const int p = static_cast<int>(pf.names.size());

  double intercept;
  if (link == Link::Identity) {
    intercept = y.mean();
  } else {
    intercept = logit(std::clamp(y.mean(), 1e-6, 1.0 - 1e-6));
  }

  std::vector<BagResult> bags(static_cast<std::size_t>(cfg.bags));
  parallel_for(
      static_cast<std::size_t>(cfg.bags),
      [&](std::size_t b) {
        bags[b] = train_bag(y, link, pf, cfg, b, intercept, b == 0 ? trace : nullptr);
      },
      cfg.n_threads);

  GamModel model;
  model.link = link;
  model.target = std::string(target);
  model.config = cfg;
  model.shapes.resize(static_cast<std::size_t>(p));
  double center_mass = 0;
  for (int j = 0; j < p; ++j) {
    auto& shape = model.shapes[static_cast<std::size_t>(j)];
    shape.feature = pf.names[static_cast<std::size_t>(j)];
    shape.layout = pf.layouts[static_cast<std::size_t>(j)];
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(shape.layout.n_bins());
    for (const auto& bag : bags) theta += bag.theta[static_cast<std::size_t>(j)];
    theta /= static_cast<double>(cfg.bags);
    // center: move the count-weighted mean into the intercept
    const double mu = shape.layout.counts.dot(theta) / static_cast<double>(n);
    theta.array() -= mu;
    center_mass += mu;
    shape.scores = std::move(theta);
  }
  model.intercept = intercept + center_mass;
  return model;
}

void validate_target(const Eigen::VectorXd& y, Link link) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw ValueError("fit_gam: non-finite target value");
  }
  if (link == Link::Logistic) {
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] == 0.0) has0 = true;
      else if (y[i] == 1.0) has1 = true;
      else throw ValueError("fit_gam: logistic link requires a 0/1 target");
    }
    if (!has0 || !has1) throw ValueError("fit_gam: single-class binary target");
  }
}

}  // namespace

GamModel fit_gam(const Table& table, std::string_view target, const GamConfig& config,
                 TrainTrace* trace) {
  const Column& tcol = table.column(target);
  if (tcol.n_missing() > 0) throw ValueError("fit_gam: target column has missing values");
  Link link;
  if (config.link) {
    link = *config.link;
  } else if (tcol.kind == ColumnKind::Binary) {
    link = Link::Logistic;
  } else if (tcol.kind == ColumnKind::Continuous) {
    link = Link::Identity;
  } else {
    throw ValueError("fit_gam: categorical targets are not supported");
  }
  validate_target(tcol.values, link);
  if (table.n_rows < 2) throw ValueError("fit_gam: need at least 2 rows");

  Prepared pf = prepare_features(table, target, config.max_bins);
  return train_core(target, tcol.values, link, pf, config, trace);
}

GamModel fit_gam_prebinned(const Table& table, std::string_view target, const GamConfig& config,
                           const std::vector<std::string>& feature_names,
                           const std::vector<BinLayout>& layouts,
                           const Eigen::MatrixXi& bin_indices, TrainTrace* trace) {
  const Column& tcol = table.column(target);
  Link link = config.link.value_or(tcol.kind == ColumnKind::Binary ? Link::Logistic
                                                                   : Link::Identity);
  validate_target(tcol.values, link);
  Prepared pf;
  pf.n = table.n_rows;
  pf.names = feature_names;
  pf.layouts = layouts;
  for (int j = 0; j < bin_indices.cols(); ++j) pf.bins.push_back(bin_indices.col(j));
  return train_core(target, tcol.values, link, pf, config, trace);
}

Eigen::MatrixXi bin_table(const GamModel& model, const Table& table) {
  const int p = static_cast<int>(model.shapes.size());
  Eigen::MatrixXi bins(table.n_rows, p);
  for (int j = 0; j < p; ++j) {
    const auto& shape = model.shapes[static_cast<std::size_t>(j)];
    const Column& col = table.column(shape.feature);
    if (shape.layout.categorical) {
      // map the table's category indices onto the layout vocabulary
      std::unordered_map<std::string, int> vocab;
      for (std::size_t c = 0; c < shape.layout.categories.size(); ++c)
        vocab[shape.layout.categories[c]] = static_cast<int>(c);
      for (Index i = 0; i < table.n_rows; ++i) {
        if (col.is_missing(i)) {
          bins(i, j) = shape.layout.bin_of(0, true);
          continue;
        }
        const auto& name = col.categories[static_cast<std::size_t>(col.values[i])];
        auto it = vocab.find(name);
        bins(i, j) = it == vocab.end() ? shape.layout.bin_of(-1.0, false) : it->second;
      }
    } else {
      for (Index i = 0; i < table.n_rows; ++i)
        bins(i, j) = shape.layout.bin_of(col.values[i], col.is_missing(i));
    }
  }
  return bins;
}

Eigen::VectorXd predict_scores(const GamModel& model, const Table& table) {
  const Eigen::MatrixXi bins = bin_table(model, table);
  Eigen::VectorXd scores(table.n_rows);
  for (Index i = 0; i < table.n_rows; ++i) {
    double s = model.intercept;
    for (int j = 0; j < bins.cols(); ++j)
      s += model.shapes[static_cast<std::size_t>(j)].scores[bins(i, j)];
    scores[i] = s;
  }
  return scores;
}

Eigen::VectorXd predict_probabilities(const GamModel& model, const Table& table) {
  if (model.link != Link::Logistic)
    throw ValueError("predict_probabilities: model has identity link");
  Eigen::VectorXd s = predict_scores(model, table);
  for (Index i = 0; i < s.size(); ++i) s[i] = sigmoid(s[i]);
  return s;
}

Prediction predict(const GamModel& model, const Table& table, Index row) {
  const Eigen::MatrixXi bins = bin_table(model, table);
  double s = model.intercept;
  for (int j = 0; j < bins.cols(); ++j)
    s += model.shapes[static_cast<std::size_t>(j)].scores[bins(row, j)];
  Prediction out;
  out.score = s;
  if (model.link == Link::Logistic) out.probability = sigmoid(s);
  return out;
}

const ShapeFunction& shape_of(const GamModel& model, std::string_view feature) {
  return model.shape(feature);
}

std::vector<IndicatorTerm> to_indicator_form(const GamModel& model, std::string_view feature) {
  const ShapeFunction& shape = model.shape(feature);
  std::vector<IndicatorTerm> terms;
  for (int b = 0; b < shape.layout.n_bins(); ++b) {
    IndicatorTerm term;
    term.score = shape.scores[b];
    term.count = shape.layout.counts[b];
    if (shape.layout.missing_bin && b == *shape.layout.missing_bin) {
      term.is_missing = true;
      if (shape.layout.sentinel) term.lo = term.hi = *shape.layout.sentinel;
      if (shape.layout.categorical)
        term.category = shape.layout.categories[static_cast<std::size_t>(b)];
      term.is_category = shape.layout.categorical;
    } else if (shape.layout.categorical) {
      term.is_category = true;
      term.category = shape.layout.categories[static_cast<std::size_t>(b)];
    } else {
      term.lo = shape.layout.lo(b);
      term.hi = shape.layout.hi(b);
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

std::vector<std::pair<std::string, double>> variable_importance(const GamModel& model) {
  std::vector<std::pair<std::string, double>> result;
  for (const auto& shape : model.shapes) {
    const double n = shape.layout.counts.sum();
    double imp = 0;
    if (n > 0) imp = shape.layout.counts.dot(shape.scores.cwiseAbs()) / n;
    result.emplace_back(shape.feature, imp);
  }
  std::stable_sort(result.begin(), result.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return result;
}

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) v[i++] = x.get<double>();
  return v;
}

}  // namespace

nlohmann::json model_to_json(const GamModel& model) {
  nlohmann::json j;
  j["format"] = "missinglens-model";
  j["version"] = 1;
  j["link"] = to_string(model.link);
  j["intercept"] = model.intercept;
  j["target"] = model.target;
  j["config"] = {{"max_bins", model.config.max_bins},
                 {"learning_rate", model.config.learning_rate},
                 {"rounds", model.config.rounds},
                 {"bags", model.config.bags},
                 {"depth", model.config.depth},
                 {"min_leaf", model.config.min_leaf},
                 {"holdout_fraction", model.config.holdout_fraction},
                 {"patience", model.config.patience},
                 {"bootstrap", model.config.bootstrap},
                 {"seed", model.config.seed}};
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& shape : model.shapes) {
    nlohmann::json f;
    f["feature"] = shape.feature;
    f["categorical"] = shape.layout.categorical;
    if (shape.layout.categorical) {
      f["categories"] = shape.layout.categories;
    } else {
      f["edges"] = vector_to_json(shape.layout.edges);
    }
    if (shape.layout.missing_bin) f["missing_bin"] = *shape.layout.missing_bin;
    if (shape.layout.sentinel) f["sentinel"] = *shape.layout.sentinel;
    if (shape.layout.separation_offset) {
      f["separation"] = {{"offset", *shape.layout.separation_offset},
                         {"boundary", shape.layout.separation_boundary},
                         {"imputed_edges", vector_to_json(shape.layout.imputed_edges)}};
    }
    f["counts"] = vector_to_json(shape.layout.counts);
    f["scores"] = vector_to_json(shape.scores);
    feats.push_back(std::move(f));
  }
  j["features"] = std::move(feats);
  j["edits"] = model.edit_history;
  return j;
}

GamModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "missinglens-model")
    throw ParseError("not a missinglens model file");
  if (j.value("version", -1) != 1)
    throw ParseError("unsupported model schema version");
  GamModel model;
  model.link = link_from_string(j.at("link").get<std::string>());
  model.intercept = j.at("intercept").get<double>();
  model.target = j.value("target", "");
  if (j.contains("config")) {
    const auto& c = j["config"];
    model.config.max_bins = c.value("max_bins", model.config.max_bins);
    model.config.learning_rate = c.value("learning_rate", model.config.learning_rate);
    model.config.rounds = c.value("rounds", model.config.rounds);
    model.config.bags = c.value("bags", model.config.bags);
    model.config.depth = c.value("depth", model.config.depth);
    model.config.min_leaf = c.value("min_leaf", model.config.min_leaf);
    model.config.holdout_fraction = c.value("holdout_fraction", model.config.holdout_fraction);
    model.config.patience = c.value("patience", model.config.patience);
    model.config.bootstrap = c.value("bootstrap", model.config.bootstrap);
    model.config.seed = c.value("seed", model.config.seed);
  }
  for (const auto& f : j.at("features")) {
    ShapeFunction shape;
    shape.feature = f.at("feature").get<std::string>();
    shape.layout.categorical = f.value("categorical", false);
    if (shape.layout.categorical) {
      shape.layout.categories = f.at("categories").get<std::vector<std::string>>();
    } else {
      shape.layout.edges = vector_from_json(f.at("edges"));
    }
    if (f.contains("missing_bin")) shape.layout.missing_bin = f["missing_bin"].get<int>();
    if (f.contains("sentinel")) shape.layout.sentinel = f["sentinel"].get<double>();
    if (f.contains("separation")) {
      shape.layout.separation_offset = f["separation"].at("offset").get<double>();
      shape.layout.separation_boundary = f["separation"].at("boundary").get<int>();
      shape.layout.imputed_edges = vector_from_json(f["separation"].at("imputed_edges"));
    }
    shape.layout.counts = vector_from_json(f.at("counts"));
    shape.scores = vector_from_json(f.at("scores"));
    if (shape.scores.size() != shape.layout.counts.size())
      throw ParseError("corrupt model: scores/counts size mismatch for " + shape.feature);
    model.shapes.push_back(std::move(shape));
  }
  model.edit_history = j.value("edits", nlohmann::json::array());
  return model;
}

void save_model(const GamModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path.string());
  out << model_to_json(model).dump(2) << "\n";
}

GamModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt model file: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace missinglens
