#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "missinglens/table.hpp"

namespace missinglens {

enum class Link { Identity, Logistic };

std::string to_string(Link link);
Link link_from_string(std::string_view s);

// Fixed binning of one feature. Continuous value bins partition
// (edges[0], edges[B]]; values at or below edges[0] clamp into bin 0, values
// above edges[B] clamp into the last value bin. The missing bin, when present,
// sits after the value bins and holds sentinel-encoded and mask-missing cells.
struct BinLayout {
  bool categorical = false;
  Eigen::VectorXd edges;                 // continuous: n_value_bins + 1 edges
  std::vector<std::string> categories;   // categorical: one bin per category
  std::optional<int> missing_bin;        // index in [0, n_bins())
  std::optional<double> sentinel;        // continuous sentinel routed to missing_bin
  Eigen::VectorXd counts;                // per bin; sums to the table's n_rows

  // Separated-shape layouts append imputed-group bins after the observed value
  // bins; their edges live on the original axis, the plotted axis adds offset.
  std::optional<double> separation_offset;
  int separation_boundary = -1;          // first imputed bin index
  Eigen::VectorXd imputed_edges;

  int n_bins() const { return static_cast<int>(counts.size()); }
  int n_value_bins() const;
  int bin_of(double value, bool missing) const;
  double lo(int bin) const;
  double hi(int bin) const;
  double width(int bin) const { return hi(bin) - lo(bin); }

  // Value bin containing x under the same (lo, hi] + clamping convention used
  // for data. Never returns the missing bin.
  int value_bin_of(double x) const;
};

BinLayout build_bins(const Column& column, int max_bins);

struct ShapeFunction {
  std::string feature;
  BinLayout layout;
  Eigen::VectorXd scores;  // one per bin, including the missing bin

  double at_bin(int bin) const { return scores[bin]; }
};

struct GamConfig {
  int max_bins = 256;
  double learning_rate = 0.01;
  int rounds = 500;  // boosting cycles (each visits every feature once)
  int bags = 8;
  int depth = 3;
  double min_leaf = 2;
  double holdout_fraction = 0.15;  // per-bag early-stopping holdout
  int patience = 50;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int n_threads = 0;
  std::optional<Link> link;  // default: binary target -> logistic, else identity
};

struct GamModel {
  double intercept = 0;
  Link link = Link::Identity;
  std::string target;
  std::vector<ShapeFunction> shapes;  // one per feature, in feature order
  GamConfig config;
  nlohmann::json edit_history = nlohmann::json::array();

  int feature_index(std::string_view name) const;  // -1 if absent
  const ShapeFunction& shape(std::string_view name) const;
};

// Per-cycle losses, recorded when a trace is supplied (single-bag fits).
struct TrainTrace {
  std::vector<double> train_loss;
  std::vector<double> holdout_loss;
};

GamModel fit_gam(const Table& table, std::string_view target, const GamConfig& config = {},
                 TrainTrace* trace = nullptr);

// Same trainer with caller-supplied layouts and bin assignments (used by the
// separated-shape encoding, where bins are routed by imputation provenance).
GamModel fit_gam_prebinned(const Table& table, std::string_view target, const GamConfig& config,
                           const std::vector<std::string>& feature_names,
                           const std::vector<BinLayout>& layouts,
                           const Eigen::MatrixXi& bin_indices, TrainTrace* trace = nullptr);

// Per-row bin index for every model feature, matching columns by name and
// categories by string. Out-of-range values clamp into the nearest edge bin.
Eigen::MatrixXi bin_table(const GamModel& model, const Table& table);

struct Prediction {
  double score = 0;
  std::optional<double> probability;
};

Prediction predict(const GamModel& model, const Table& table, Index row);
Eigen::VectorXd predict_scores(const GamModel& model, const Table& table);
Eigen::VectorXd predict_probabilities(const GamModel& model, const Table& table);

const ShapeFunction& shape_of(const GamModel& model, std::string_view feature);

// Indicator-expansion view of one shape: the shape as a sum of
// score * 1{value in bin} terms. Re-evaluating it reproduces the shape exactly.
struct IndicatorTerm {
  double lo = 0, hi = 0;
  bool is_missing = false;
  bool is_category = false;
  std::string category;
  double score = 0;
  double count = 0;
};

std::vector<IndicatorTerm> to_indicator_form(const GamModel& model, std::string_view feature);

// Density-weighted mean absolute score per feature, descending (ties keep
// feature order).
std::vector<std::pair<std::string, double>> variable_importance(const GamModel& model);

nlohmann::json model_to_json(const GamModel& model);
GamModel model_from_json(const nlohmann::json& j);
void save_model(const GamModel& model, const std::filesystem::path& path);
GamModel load_model(const std::filesystem::path& path);

// Mean log-loss (clipped probabilities) or mean squared error.
double gam_loss(Link link, const Eigen::VectorXd& scores, const Eigen::VectorXd& y);

}  // namespace missinglens
