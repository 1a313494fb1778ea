#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "missinglens/irls.hpp"

using namespace missinglens;

TEST_CASE("dense IRLS reproduces a reference logistic fit") {
  // x_i = (-10+i)*0.2 grid; coefficients/SEs frozen from an independent
  // Newton fit of the same data
  const int n = 21;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  const double labels[n] = {0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1};
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = (-10.0 + i) * 0.2;
    y[i] = labels[i];
  }
  IrlsOptions opt;
  opt.ridge = 0.0;
  IrlsDenseResult fit = irls_logistic(X, y, nullptr, opt);
  REQUIRE(fit.converged);
  CHECK(fit.beta[0] == doctest::Approx(-0.15463541342103557).epsilon(1e-7));
  CHECK(fit.beta[1] == doctest::Approx(1.3868289881218665).epsilon(1e-7));
  CHECK(std::sqrt(fit.cov(0, 0)) == doctest::Approx(0.5580902433021172).epsilon(1e-6));
  CHECK(std::sqrt(fit.cov(1, 1)) == doctest::Approx(0.580924557630458).epsilon(1e-6));
}

TEST_CASE("indicator IRLS agrees with an explicit dense design") {
  // two features, 3 and 4 bins, deterministic assignment pattern
  const Eigen::Index n = 400;
  IndicatorDesign design;
  design.n_rows = n;
  Eigen::VectorXi b1(n), b2(n);
  Eigen::VectorXd y(n);
  std::uint64_t s = 5;
  auto next = [&]() {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(s >> 11) / static_cast<double>(1ULL << 53);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    b1[i] = static_cast<int>(next() * 3);
    b2[i] = static_cast<int>(next() * 4);
    const double logit = 0.4 * (b1[i] - 1.0) - 0.5 * (b2[i] - 1.5);
    y[i] = next() < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
  }
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(3), c2 = Eigen::VectorXd::Zero(4);
  for (Eigen::Index i = 0; i < n; ++i) {
    c1[b1[i]] += 1;
    c2[b2[i]] += 1;
  }
  design.bins = {b1, b2};
  design.bin_counts = {c1, c2};

  std::vector<Eigen::VectorXd> warm = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(4)};
  IrlsOptions opt;
  opt.ridge = 0.0;
  IndicatorIrlsResult structured = irls_indicator_logistic(design, y, 0.0, warm, opt);
  REQUIRE(structured.converged);

  // the dense equivalent: [1 | I1 C1 | I2 C2]
  Eigen::HouseholderQR<Eigen::MatrixXd> qr1(c1), qr2(c2);
  Eigen::MatrixXd C1 =
      (qr1.householderQ() * Eigen::MatrixXd::Identity(3, 3)).rightCols(2);
  Eigen::MatrixXd C2 =
      (qr2.householderQ() * Eigen::MatrixXd::Identity(4, 4)).rightCols(3);
  Eigen::MatrixXd Z(n, 1 + 2 + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    Z(i, 0) = 1.0;
    Z.block(i, 1, 1, 2) = C1.row(b1[i]);
    Z.block(i, 3, 1, 3) = C2.row(b2[i]);
  }
  IrlsDenseResult dense = irls_logistic(Z, y, nullptr, opt);
  REQUIRE(dense.converged);

  CHECK(structured.intercept == doctest::Approx(dense.beta[0]).epsilon(1e-7));
  Eigen::VectorXd theta1 = C1 * dense.beta.segment(1, 2);
  Eigen::VectorXd theta2 = C2 * dense.beta.segment(3, 3);
  for (int k = 0; k < 3; ++k)
    CHECK(structured.theta[0][k] == doctest::Approx(theta1[k]).epsilon(1e-6));
  for (int k = 0; k < 4; ++k)
    CHECK(structured.theta[1][k] == doctest::Approx(theta2[k]).epsilon(1e-6));

  // standard errors of the centered bin coefficients
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd row = C1.row(k).transpose();
    const double se_dense = std::sqrt(row.dot(dense.cov.block(1, 1, 2, 2) * row));
    CHECK(structured.se(0, k) == doctest::Approx(se_dense).epsilon(1e-6));
  }
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd row = C2.row(k).transpose();
    const double se_dense = std::sqrt(row.dot(dense.cov.block(3, 3, 3, 3) * row));
    CHECK(structured.se(1, k) == doctest::Approx(se_dense).epsilon(1e-6));
  }

  // fitted coefficients satisfy the count-weighted centering constraint
  CHECK(std::abs(c1.dot(structured.theta[0])) < 1e-8);
  CHECK(std::abs(c2.dot(structured.theta[1])) < 1e-8);
}

TEST_CASE("separated data reports non-convergence instead of fake SEs") {
  const Eigen::Index n = 40;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = static_cast<double>(i);
    y[i] = i < 20 ? 0.0 : 1.0;  // perfectly separable
  }
  IrlsOptions opt;
  opt.max_iter = 200;
  IrlsDenseResult fit = irls_logistic(X, y, nullptr, opt);
  // either flagged non-converged or has exploded SEs; both are acceptable
  const double se = std::sqrt(fit.cov(1, 1));
  CHECK((!fit.converged || se > 10.0 || !std::isfinite(se)));
}
