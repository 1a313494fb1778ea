#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "missinglens/gam.hpp"
#include "missinglens/table.hpp"

namespace missinglens {

enum class ImputeMethod { Mean, Median, Constant, Knn, IterativeForest };

std::string to_string(ImputeMethod m);

struct ImputerConfig {
  ImputeMethod method = ImputeMethod::Mean;
  double constant = 0;
  int k = 5;            // KNN neighbors
  int n_trees = 100;    // iterative forest
  int max_iter = 10;
  std::uint64_t seed = 0;
  int n_threads = 0;
};

// Which cells were filled, by what, and with which values.
struct ImputationRecord {
  std::string column;
  std::string method;
  std::vector<Index> rows;
  Eigen::VectorXd values;
  bool fallback = false;  // KNN fell back to the column mean for some cells
};

struct ImputedTable {
  Table table;
  std::vector<ImputationRecord> records;
  int sweeps = 0;  // iterative forest sweeps actually kept
};

ImputedTable impute_simple(const Table& table, std::string_view feature, ImputeMethod method,
                           double constant = 0);

// Fills every column with missing cells. Distances are Euclidean over features
// observed in both rows, standardized per feature, divided by the shared
// feature count; the K nearest donors with the target feature observed
// contribute their mean (mode for categorical).
ImputedTable impute_knn(const Table& table, int k, std::uint64_t seed = 0);

// MissForest-style sweep: initialize by mean/mode, visit features by ascending
// missing rate, refit a random forest per feature, and stop when the
// normalized change in imputed values increases (returning the previous
// sweep's values) or at max_iter.
ImputedTable impute_iterative_forest(const Table& table, const ImputerConfig& config);

// Discrete curvature of a shape function across bins of unequal width,
// for interior value bins only (k = 1 .. B-2).
Eigen::VectorXd second_order_diff(const ShapeFunction& shape);

enum class AuditStatistic { Mean, Median };
enum class AuditVerdict { Harmful, Harmless, NotApplicable };

std::string to_string(AuditVerdict v);

struct SpikeAudit {
  std::string feature;
  Eigen::VectorXd bin_diffs;       // interior value bins
  Eigen::VectorXd anomaly_scores;  // aligned with bin_diffs
  double contamination = 0.05;
  std::vector<int> flagged_bins;   // value-bin indices (interior)
  int mean_bin = -1;
  int median_bin = -1;
  double mean_value = 0;
  double median_value = 0;
  AuditVerdict verdict = AuditVerdict::NotApplicable;
};

// Pools second-order differences across all continuous >=3-bin shapes, fits
// one isolation forest on them, flags the top `contamination` fraction by
// anomaly score, and marks a feature harmful when the bin covering its column
// mean (or median, per `statistic`) is flagged.
std::vector<SpikeAudit> audit_imputation(const GamModel& model, const Table& table,
                                         AuditStatistic statistic, double contamination = 0.05,
                                         std::uint64_t seed = 0);

}  // namespace missinglens
