#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "missinglens/error.hpp"

namespace missinglens {

// Greedy variance-reduction regression tree over a dense feature matrix.
// Continuous splits test x <= threshold (thresholds are midpoints between
// consecutive distinct sorted values); categorical splits send a category set
// left, chosen one-vs-rest after ordering categories by target mean. Ties in
// gain break toward the lowest feature index, then the lowest threshold.
struct TreeNode {
  bool leaf = true;
  double value = 0;             // leaf prediction (mean, or mode for categorical targets)
  int feature = -1;
  double threshold = 0;         // continuous split
  std::vector<int> left_categories;  // categorical split: these go left
  int left = -1, right = -1;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  int max_depth = 0;
  std::vector<bool> categorical_features;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

RegressionTree fit_regression_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                                   const Eigen::VectorXd* weights,
                                   const std::vector<bool>& categorical_features, int max_depth,
                                   double min_leaf, bool mode_leaves = false);

struct ForestConfig {
  int n_trees = 100;
  int mtry = 0;            // 0 -> max(1, p/3) regression, ceil(sqrt(p)) classification
  double subsample = 1.0;  // fraction of rows per tree
  bool bootstrap = true;   // sample with replacement (size = subsample * n)
  int max_depth = 25;
  double min_leaf = 5;
  std::uint64_t seed = 0;
  bool categorical_target = false;  // prediction becomes a mode vote
  int n_threads = 0;
};

struct RandomForest {
  std::vector<RegressionTree> trees;
  ForestConfig config;
  std::vector<bool> categorical_features;
  int n_categories = 0;  // for categorical targets

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

RandomForest fit_random_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& targets,
                               const std::vector<bool>& categorical_features,
                               const ForestConfig& config);

// Isolation forest. anomaly_score = 2^(-E[path length] / c(subsample_size))
// with the exact harmonic-number normalizer c(n) = 2 H(n-1) - 2 (n-1)/n.
class IsolationForest {
public:
  struct Node {
    int feature = -1;
    double split = 0;
    int left = -1, right = -1;
    int size = 0;  // external node: sample count isolated here
  };

  double anomaly_score(const Eigen::Ref<const Eigen::RowVectorXd>& v) const;
  Eigen::VectorXd anomaly_scores(const Eigen::MatrixXd& X) const;

  int n_trees() const { return static_cast<int>(trees_.size()); }
  int subsample_size() const { return subsample_; }

private:
  friend IsolationForest fit_isolation_forest(const Eigen::MatrixXd&, int, int, std::uint64_t);
  std::vector<std::vector<Node>> trees_;
  int subsample_ = 0;
  double normalizer_ = 1.0;
};

IsolationForest fit_isolation_forest(const Eigen::MatrixXd& points, int n_trees = 100,
                                     int subsample_size = 256, std::uint64_t seed = 0);

// c(n): average unsuccessful-search path length in a BST of n nodes.
double isolation_path_normalizer(int n);

}  // namespace missinglens
