#pragma once

#include <Eigen/Dense>
#include <vector>

#include "missinglens/gam.hpp"

namespace missinglens {

struct IrlsOptions {
  int max_iter = 100;
  double tol = 1e-8;
  double ridge = 1e-8;
};

// Plain dense logistic regression (intercept is the caller's first column if
// wanted). cov is the inverse Fisher information at the optimum.
struct IrlsDenseResult {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  bool converged = false;
  int iterations = 0;
  double log_loss = 0;
};

IrlsDenseResult irls_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* warm_start = nullptr,
                              const IrlsOptions& options = {});

// Logistic regression on the frozen bin-indicator design of a trained additive
// model: intercept plus, for every feature, one indicator per bin. Each
// feature's coefficients are constrained to the count-weighted centering
// subspace (counts . theta = 0), which removes the indicator/intercept
// collinearity while keeping coefficients comparable to the model's centered
// bin scores. Fisher information is accumulated from joint bin counts, so the
// cost per iteration is O(n p^2) plus one solve in the reduced basis.
struct IndicatorDesign {
  std::vector<Eigen::VectorXi> bins;      // per feature, length n
  std::vector<Eigen::VectorXd> bin_counts;  // per feature: centering weights
  Eigen::Index n_rows = 0;
};

struct IndicatorIrlsResult {
  double intercept = 0;
  std::vector<Eigen::VectorXd> theta;  // per feature, centered coordinates
  bool converged = false;
  int iterations = 0;

  // Standard error of theta[feature][bin] under the centering constraint.
  double se(int feature, int bin) const;

  std::vector<Eigen::MatrixXd> basis;  // per feature: bins x (bins-1)
  Eigen::MatrixXd covariance;          // reduced-basis inverse Fisher
  std::vector<int> offsets;            // reduced-basis block start per feature
};

IndicatorIrlsResult irls_indicator_logistic(const IndicatorDesign& design,
                                            const Eigen::VectorXd& y, double warm_intercept,
                                            const std::vector<Eigen::VectorXd>& warm_theta,
                                            const IrlsOptions& options = {});

// Convenience: design + warm start harvested from a fitted logistic GAM.
IndicatorDesign indicator_design_of(const GamModel& model, const Table& table);

}  // namespace missinglens
