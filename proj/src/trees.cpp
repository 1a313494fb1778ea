#include "missinglens/trees.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "missinglens/parallel.hpp"
#include "missinglens/rng.hpp"

namespace missinglens {

namespace {

struct SplitChoice {
  bool found = false;
  double gain = 0;
  int feature = -1;
  double threshold = 0;
  std::vector<int> left_categories;
};

// Sum-of-squares gain of splitting (S,W) into (Sl,Wl) and (S-Sl, W-Wl),
// relative to the unsplit node. Larger is better.
double split_gain(double S, double W, double Sl, double Wl) {
  const double Sr = S - Sl, Wr = W - Wl;
  return Sl * Sl / Wl + Sr * Sr / Wr - S * S / W;
}

class TreeBuilder {
public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
              const std::vector<bool>& categorical, int max_depth, double min_leaf,
              bool mode_leaves)
      : X_(X), y_(y), w_(w), categorical_(categorical), max_depth_(max_depth),
        min_leaf_(min_leaf), mode_leaves_(mode_leaves) {}

  RegressionTree build(std::vector<Eigen::Index> rows) {
    RegressionTree tree;
    tree.max_depth = max_depth_;
    tree.categorical_features = categorical_;
    grow(tree, std::move(rows), max_depth_);
    return tree;
  }

private:
  double leaf_value(const std::vector<Eigen::Index>& rows) const {
    if (mode_leaves_) {
      std::map<double, double> votes;
      for (auto i : rows) votes[y_[i]] += w_[i];
      double best = 0, best_w = -1;
      for (const auto& [v, wt] : votes) {
        if (wt > best_w) {
          best_w = wt;
          best = v;
        }
      }
      return best;
    }
    double S = 0, W = 0;
    for (auto i : rows) {
      S += w_[i] * y_[i];
      W += w_[i];
    }
    return W > 0 ? S / W : 0.0;
  }

  int grow(RegressionTree& tree, std::vector<Eigen::Index> rows, int depth_left) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_id].value = leaf_value(rows);

    if (depth_left == 0 || rows.size() < 2) return node_id;

    double S = 0, W = 0;
    bool constant_target = true;
    for (auto i : rows) {
      S += w_[i] * y_[i];
      W += w_[i];
      if (y_[i] != y_[rows[0]]) constant_target = false;
    }
    if (constant_target || W < 2 * min_leaf_) return node_id;

    SplitChoice best = find_split(rows, S, W);
    if (!best.found) return node_id;

    std::vector<Eigen::Index> left_rows, right_rows;
    for (auto i : rows) {
      bool goes_left;
      if (categorical_[static_cast<std::size_t>(best.feature)]) {
        const int cat = static_cast<int>(X_(i, best.feature));
        goes_left = std::find(best.left_categories.begin(), best.left_categories.end(), cat) !=
                    best.left_categories.end();
      } else {
        goes_left = X_(i, best.feature) <= best.threshold;
      }
      (goes_left ? left_rows : right_rows).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = grow(tree, std::move(left_rows), depth_left - 1);
    const int right_id = grow(tree, std::move(right_rows), depth_left - 1);
    TreeNode& node = tree.nodes[node_id];
    node.leaf = false;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left_categories = best.left_categories;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  SplitChoice find_split(const std::vector<Eigen::Index>& rows, double S, double W) const {
    SplitChoice best;
    const std::vector<int>& features = feature_subset_.empty() ? all_features() : feature_subset_;
    for (int f : features) {
      if (categorical_[static_cast<std::size_t>(f)]) {
        consider_categorical(rows, S, W, f, best);
      } else {
        consider_continuous(rows, S, W, f, best);
      }
    }
    return best;
  }

  void consider_continuous(const std::vector<Eigen::Index>& rows, double S, double W, int f,
                           SplitChoice& best) const {
    std::vector<Eigen::Index> order = rows;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return X_(a, f) < X_(b, f);
    });
    double Sl = 0, Wl = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      Sl += w_[order[k]] * y_[order[k]];
      Wl += w_[order[k]];
      const double a = X_(order[k], f), b = X_(order[k + 1], f);
      if (a == b) continue;
      if (Wl < min_leaf_ || W - Wl < min_leaf_) continue;
      const double gain = split_gain(S, W, Sl, Wl);
      const double threshold = a + 0.5 * (b - a);
      if (gain > best.gain + 1e-12) {
        best.found = true;
        best.gain = gain;
        best.feature = f;
        best.threshold = threshold;
        best.left_categories.clear();
      }
    }
  }

  void consider_categorical(const std::vector<Eigen::Index>& rows, double S, double W, int f,
                            SplitChoice& best) const {
    std::map<int, std::pair<double, double>> stats;  // cat -> (S, W)
    for (auto i : rows) {
      auto& [cs, cw] = stats[static_cast<int>(X_(i, f))];
      cs += w_[i] * y_[i];
      cw += w_[i];
    }
    if (stats.size() < 2) return;
    std::vector<std::pair<double, int>> ordered;  // (mean, cat)
    for (const auto& [cat, sw] : stats) ordered.emplace_back(sw.first / sw.second, cat);
    std::sort(ordered.begin(), ordered.end());
    // best prefix of the mean-ordered categories (optimal one-vs-rest for L2)
    double Sl = 0, Wl = 0;
    std::vector<int> prefix;
    for (std::size_t k = 0; k + 1 < ordered.size(); ++k) {
      const auto& sw = stats.at(ordered[k].second);
      Sl += sw.first;
      Wl += sw.second;
      prefix.push_back(ordered[k].second);
      if (Wl < min_leaf_ || W - Wl < min_leaf_) continue;
      const double gain = split_gain(S, W, Sl, Wl);
      if (gain > best.gain + 1e-12) {
        best.found = true;
        best.gain = gain;
        best.feature = f;
        best.threshold = 0;
        best.left_categories = prefix;
        std::sort(best.left_categories.begin(), best.left_categories.end());
      }
    }
  }

  const std::vector<int>& all_features() const {
    if (all_features_.empty()) {
      all_features_.resize(static_cast<std::size_t>(X_.cols()));
      std::iota(all_features_.begin(), all_features_.end(), 0);
    }
    return all_features_;
  }

public:
  std::vector<int> feature_subset_;  // set by forest training (mtry)

private:
  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  const Eigen::VectorXd& w_;
  const std::vector<bool>& categorical_;
  int max_depth_;
  double min_leaf_;
  bool mode_leaves_;
  mutable std::vector<int> all_features_;
};

}  // namespace

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int id = 0;
  while (!nodes[static_cast<std::size_t>(id)].leaf) {
    const TreeNode& node = nodes[static_cast<std::size_t>(id)];
    bool goes_left;
    if (categorical_features[static_cast<std::size_t>(node.feature)]) {
      const int cat = static_cast<int>(row[node.feature]);
      goes_left = std::binary_search(node.left_categories.begin(), node.left_categories.end(), cat);
    } else {
      goes_left = row[node.feature] <= node.threshold;
    }
    id = goes_left ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(id)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
  return out;
}

RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                                   const Eigen::VectorXd* weights,
                                   const std::vector<bool>& categorical_features, int max_depth,
                                   double min_leaf, bool mode_leaves) {
  if (X.rows() == 0) throw ValueError("fit_regression_tree: empty input");
  if (X.cols() == 0) throw ValueError("fit_regression_tree: no features");
  if (X.rows() != targets.size()) throw ValueError("fit_regression_tree: X/targets length mismatch");
  if (max_depth < 1) throw ValueError("fit_regression_tree: max_depth must be >= 1");
  if (static_cast<Eigen::Index>(categorical_features.size()) != X.cols())
    throw ValueError("fit_regression_tree: categorical flags length mismatch");

  Eigen::VectorXd w = weights ? *weights : Eigen::VectorXd::Ones(X.rows());
  TreeBuilder builder(X, targets, w, categorical_features, max_depth, min_leaf, mode_leaves);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return builder.build(std::move(rows));
}

double RandomForest::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  if (config.categorical_target) {
    std::map<double, int> votes;
    for (const auto& t : trees) votes[t.predict_row(row)] += 1;
    double best = 0;
    int best_n = -1;
    for (const auto& [v, n] : votes) {
      if (n > best_n) {
        best_n = n;
        best = v;
      }
    }
    return best;
  }
  double sum = 0;
  for (const auto& t : trees) sum += t.predict_row(row);
  return sum / static_cast<double>(trees.size());
}

Eigen::VectorXd RandomForest::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
  return out;
}

RandomForest fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                               const std::vector<bool>& categorical_features,
                               const ForestConfig& config) {
  if (X.cols() == 0) throw ValueError("fit_random_forest: no features");
  if (X.rows() == 0) throw ValueError("fit_random_forest: empty input");
  if (config.n_trees < 1) throw ValueError("fit_random_forest: n_trees must be >= 1");
  const int p = static_cast<int>(X.cols());
  int mtry = config.mtry;
  if (mtry == 0)
    mtry = config.categorical_target
               ? static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))))
               : std::max(1, p / 3);
  if (mtry > p) throw ValueError("fit_random_forest: mtry exceeds feature count");

  const Eigen::Index n = X.rows();
  const auto n_draw = static_cast<Eigen::Index>(
      std::max(1.0, std::round(config.subsample * static_cast<double>(n))));

  RandomForest forest;
  forest.config = config;
  forest.config.mtry = mtry;
  forest.categorical_features = categorical_features;
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));
  if (config.categorical_target) {
    double max_cat = 0;
    for (Eigen::Index i = 0; i < n; ++i) max_cat = std::max(max_cat, targets[i]);
    forest.n_categories = static_cast<int>(max_cat) + 1;
  }

  const Rng master(config.seed);
  parallel_for(
      static_cast<std::size_t>(config.n_trees),
      [&](std::size_t t) {
        Rng rng = master.child(t);  // per-tree stream: schedule-independent
        std::vector<Eigen::Index> rows;
        rows.reserve(static_cast<std::size_t>(n_draw));
        if (config.bootstrap) {
          for (Eigen::Index i = 0; i < n_draw; ++i)
            rows.push_back(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(n))));
        } else {
          auto idx = rng.sample_without_replacement(static_cast<std::size_t>(n),
                                                    static_cast<std::size_t>(std::min(n_draw, n)));
          rows.assign(idx.begin(), idx.end());
        }
        Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
        TreeBuilder builder(X, targets, w, categorical_features, config.max_depth, config.min_leaf,
                            config.categorical_target);
        if (mtry < p) {
          auto subset = rng.sample_without_replacement(static_cast<std::size_t>(p),
                                                       static_cast<std::size_t>(mtry));
          builder.feature_subset_.assign(subset.begin(), subset.end());
          std::sort(builder.feature_subset_.begin(), builder.feature_subset_.end());
        }
        forest.trees[t] = builder.build(std::move(rows));
      },
      config.n_threads);
  return forest;
}

double isolation_path_normalizer(int n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  double harmonic = 0.0;
  for (int i = 1; i <= n - 1; ++i) harmonic += 1.0 / static_cast<double>(i);
  return 2.0 * harmonic - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

namespace {

int grow_isolation(std::vector<IsolationForest::Node>& nodes, const Eigen::MatrixXd& X,
                   std::vector<Eigen::Index>& rows, int depth, int height_limit, Rng& rng) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  nodes[static_cast<std::size_t>(id)].size = static_cast<int>(rows.size());
  if (rows.size() <= 1 || depth >= height_limit) return id;

  // features with spread among this node's samples
  std::vector<int> usable;
  for (int f = 0; f < X.cols(); ++f) {
    double lo = X(rows[0], f), hi = lo;
    for (auto i : rows) {
      lo = std::min(lo, X(i, f));
      hi = std::max(hi, X(i, f));
    }
    if (hi > lo) usable.push_back(f);
  }
  if (usable.empty()) return id;  // all points identical

  const int f = usable[static_cast<std::size_t>(rng.uniform_int(usable.size()))];
  double lo = X(rows[0], f), hi = lo;
  for (auto i : rows) {
    lo = std::min(lo, X(i, f));
    hi = std::max(hi, X(i, f));
  }
  const double split = rng.uniform(lo, hi);

  std::vector<Eigen::Index> left_rows, right_rows;
  for (auto i : rows) (X(i, f) < split ? left_rows : right_rows).push_back(i);
  if (left_rows.empty() || right_rows.empty()) return id;  // degenerate uniform draw

  rows.clear();
  rows.shrink_to_fit();
  const int left = grow_isolation(nodes, X, left_rows, depth + 1, height_limit, rng);
  const int right = grow_isolation(nodes, X, right_rows, depth + 1, height_limit, rng);
  auto& node = nodes[static_cast<std::size_t>(id)];
  node.feature = f;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

double path_length(const std::vector<IsolationForest::Node>& nodes,
                   const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  int id = 0;
  double depth = 0;
  while (nodes[static_cast<std::size_t>(id)].left >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    id = v[node.feature] < node.split ? node.left : node.right;
    depth += 1;
  }
  return depth + isolation_path_normalizer(nodes[static_cast<std::size_t>(id)].size);
}

}  // namespace

double IsolationForest::anomaly_score(const Eigen::Ref<const Eigen::RowVectorXd>& v) const {
  double total = 0;
  for (const auto& t : trees_) total += path_length(t, v);
  const double avg = total / static_cast<double>(trees_.size());
  return std::pow(2.0, -avg / normalizer_);
}

Eigen::VectorXd IsolationForest::anomaly_scores(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = anomaly_score(X.row(i));
  return out;
}

IsolationForest fit_isolation_forest(const Eigen::MatrixXd& points, int n_trees, int subsample_size,
                                     std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw ValueError("fit_isolation_forest: need at least 2 samples");
  if (n_trees < 1) throw ValueError("fit_isolation_forest: n_trees must be >= 1");
  const int psi = static_cast<int>(std::min<Eigen::Index>(subsample_size, n));

  IsolationForest forest;
  forest.subsample_ = psi;
  forest.normalizer_ = std::max(isolation_path_normalizer(psi), 1e-12);
  forest.trees_.resize(static_cast<std::size_t>(n_trees));
  const int height_limit =
      static_cast<int>(std::ceil(std::log2(std::max(2.0, static_cast<double>(psi)))));

  const Rng master(seed);
  for (std::size_t t = 0; t < forest.trees_.size(); ++t) {
    Rng rng = master.child(t);
    auto idx = rng.sample_without_replacement(static_cast<std::size_t>(n),
                                              static_cast<std::size_t>(psi));
    std::vector<Eigen::Index> rows(idx.begin(), idx.end());
    grow_isolation(forest.trees_[t], points, rows, 0, height_limit, rng);
  }
  return forest;
}

}  // namespace missinglens
