#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "missinglens/gam.hpp"
#include "missinglens/table.hpp"

namespace missinglens {

// Wald test of the missing-bin coefficient against zero. theta_hat is the
// model's centered missing-bin score; its standard error comes from an IRLS
// logistic refit on the frozen bin-indicator design.
struct WaldReport {
  std::string feature;
  double theta_hat = 0;
  double se = 0;
  double z = 0;
  double p_value = 1;
  double alpha = 0.05;
  bool reject_mcar = false;
  bool converged = true;
  double missing_count = 0;
};

WaldReport wald_mcar_test(const GamModel& model, const Table& training_table,
                          std::string_view feature, double alpha = 0.05);

struct LittleReport {
  double chi2 = 0;
  int df = 0;
  double p_value = 1;
  int n_patterns = 0;
  bool nothing_to_test = false;
  bool singular_adjusted = false;
  bool em_converged = true;
  int em_iterations = 0;
};

LittleReport littles_test(const Table& table);

// Mann-Whitney AUC; ties contribute one half.
double auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

struct ShapeSegment {
  double lo = 0, hi = 0;
  double score = 0;
  double count = 0;
};

struct SeparatedShapeCurves {
  std::vector<ShapeSegment> observed;
  std::vector<ShapeSegment> imputed;  // original-axis coordinates
  double offset = 0;
};

struct MissingnessConfig {
  GamConfig gam;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  int top_k = 3;
};

struct MissingnessReport {
  std::string feature;
  GamModel model;
  double auc_value = 0;
  double accuracy = 0;
  std::vector<std::pair<std::string, double>> top_predictors;
  std::map<std::string, SeparatedShapeCurves> separated_shapes;
  Index n_test = 0;
};

// Trains a logistic GAM on the 0/1 missingness indicator of `feature`, using
// every other column (plus the table's target when include_label) as inputs.
// Inputs with their own missing cells are mean-imputed and routed to dedicated
// imputed-group bins (the offset trick), so observed and imputed effects stay
// separate in the shapes.
MissingnessReport fit_missingness_model(const Table& table, std::string_view feature,
                                        bool include_label, const MissingnessConfig& config = {});

// Offset-separated shape of `feature` when predicting `target`: missing cells
// take their imputed values shifted above every observed value, the model is
// trained, and the imputed branch is mapped back to the original axis.
SeparatedShapeCurves separated_shape(const Table& table, std::string_view feature,
                                     const Eigen::VectorXd& imputed_values,
                                     std::string_view target, const GamConfig& config = {});

// Internal helper shared with fit_missingness_model; exposed for tests.
// Splits a separated layout's shape into observed/imputed curves.
SeparatedShapeCurves split_separated_shape(const ShapeFunction& shape);

}  // namespace missinglens
