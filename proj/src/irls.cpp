#include "missinglens/irls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "missinglens/stats.hpp"

namespace missinglens {

namespace {

double logistic_loglik(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  double ll = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double p = std::clamp(sigmoid(s[i]), 1e-12, 1.0 - 1e-12);
    ll += y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return ll;
}

}  // namespace

IrlsDenseResult irls_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* warm_start, const IrlsOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index m = X.cols();
  IrlsDenseResult result;
  result.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(m);

  Eigen::VectorXd s = X * result.beta;
  double ll = logistic_loglik(s, y);
  Eigen::MatrixXd fisher(m, m);

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    result.iterations = iter;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = std::clamp(sigmoid(s[i]), 1e-12, 1.0 - 1e-12);
      w[i] = p[i] * (1.0 - p[i]);
    }
    Eigen::VectorXd grad = X.transpose() * (y - p);
    fisher = X.transpose() * w.asDiagonal() * X;
    fisher.diagonal().array() += options.ridge;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher);
    if (ldlt.info() != Eigen::Success) return result;
    Eigen::VectorXd delta = ldlt.solve(grad);
    if (!delta.allFinite()) return result;

    // step halving keeps the likelihood non-decreasing
    double step = 1.0;
    Eigen::VectorXd beta_new, s_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 30; ++half) {
      beta_new = result.beta + step * delta;
      s_new = X * beta_new;
      ll_new = logistic_loglik(s_new, y);
      if (ll_new >= ll - 1e-12) break;
      step *= 0.5;
    }
    if (ll_new < ll - 1e-10) return result;  // stuck

    const double max_change = (step * delta).cwiseAbs().maxCoeff();
    result.beta = beta_new;
    s = s_new;
    const double improvement = ll_new - ll;
    ll = ll_new;
    if (max_change < options.tol || improvement < 1e-12) {
      result.converged = true;
      break;
    }
  }

  // covariance from the final Fisher information
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = std::clamp(sigmoid(s[i]), 1e-12, 1.0 - 1e-12);
    w[i] = p * (1.0 - p);
  }
  fisher = X.transpose() * w.asDiagonal() * X;
  fisher.diagonal().array() += options.ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher);
  if (ldlt.info() == Eigen::Success) {
    result.cov = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
  } else {
    result.cov = Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
    result.converged = false;
  }
  result.log_loss = -ll / static_cast<double>(n);
  return result;
}

double IndicatorIrlsResult::se(int feature, int bin) const {
  const auto& C = basis[static_cast<std::size_t>(feature)];
  if (C.cols() == 0) return std::numeric_limits<double>::infinity();
  const int off = offsets[static_cast<std::size_t>(feature)];
  const Eigen::VectorXd row = C.row(bin).transpose();
  const double var =
      row.dot(covariance.block(off, off, C.cols(), C.cols()) * row);
  return var >= 0 ? std::sqrt(var) : std::numeric_limits<double>::infinity();
}

IndicatorIrlsResult irls_indicator_logistic(const IndicatorDesign& design,
                                            const Eigen::VectorXd& y, double warm_intercept,
                                            const std::vector<Eigen::VectorXd>& warm_theta,
                                            const IrlsOptions& options) {
  const Eigen::Index n = design.n_rows;
  const int p = static_cast<int>(design.bins.size());

  IndicatorIrlsResult result;
  result.intercept = warm_intercept;
  result.theta = warm_theta;
  result.basis.resize(static_cast<std::size_t>(p));
  result.offsets.resize(static_cast<std::size_t>(p));

  // Orthonormal basis of { v : counts . v = 0 } per feature via the
  // Householder reflection of the counts vector.
  int m = 1;  // reduced parameter count (intercept first)
  std::vector<int> nbins(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd& c = design.bin_counts[static_cast<std::size_t>(j)];
    const int B = static_cast<int>(c.size());
    nbins[static_cast<std::size_t>(j)] = B;
    Eigen::MatrixXd C(B, std::max(0, B - 1));
    if (B > 1) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
      Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(B, B);
      C = Q.rightCols(B - 1);
    }
    result.basis[static_cast<std::size_t>(j)] = C;
    result.offsets[static_cast<std::size_t>(j)] = m;
    m += std::max(0, B - 1);
  }

  // reduced coordinates from the warm start (theta already satisfies the
  // centering constraint, so the projection is exact)
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  beta[0] = warm_intercept;
  for (int j = 0; j < p; ++j) {
    const auto& C = result.basis[static_cast<std::size_t>(j)];
    if (C.cols() > 0)
      beta.segment(result.offsets[static_cast<std::size_t>(j)], C.cols()) =
          C.transpose() * warm_theta[static_cast<std::size_t>(j)];
  }

  auto scores_of = [&](const Eigen::VectorXd& b, std::vector<Eigen::VectorXd>& theta_out) {
    theta_out.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
      const auto& C = result.basis[static_cast<std::size_t>(j)];
      theta_out[static_cast<std::size_t>(j)] =
          C.cols() > 0
              ? Eigen::VectorXd(C * b.segment(result.offsets[static_cast<std::size_t>(j)], C.cols()))
              : Eigen::VectorXd::Zero(nbins[static_cast<std::size_t>(j)]);
    }
    Eigen::VectorXd s = Eigen::VectorXd::Constant(n, b[0]);
    for (int j = 0; j < p; ++j) {
      const auto& bins = design.bins[static_cast<std::size_t>(j)];
      const auto& th = theta_out[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < n; ++i) s[i] += th[bins[i]];
    }
    return s;
  };

  std::vector<Eigen::VectorXd> theta;
  Eigen::VectorXd s = scores_of(beta, theta);
  double ll = logistic_loglik(s, y);

  const int total_bins = std::accumulate(nbins.begin(), nbins.end(), 0);
  std::vector<int> bin_offsets(static_cast<std::size_t>(p));
  for (int j = 0, acc = 0; j < p; ++j) {
    bin_offsets[static_cast<std::size_t>(j)] = acc;
    acc += nbins[static_cast<std::size_t>(j)];
  }

  Eigen::MatrixXd fisher_reduced(m, m);
  bool have_fisher = false;

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    result.iterations = iter;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = std::clamp(sigmoid(s[i]), 1e-12, 1.0 - 1e-12);
      w[i] = prob[i] * (1.0 - prob[i]);
    }

    // gradient in the full indicator basis, then projected
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
    g[0] = (y - prob).sum();
    for (int j = 0; j < p; ++j) {
      const auto& bins = design.bins[static_cast<std::size_t>(j)];
      Eigen::VectorXd u = Eigen::VectorXd::Zero(nbins[static_cast<std::size_t>(j)]);
      for (Eigen::Index i = 0; i < n; ++i) u[bins[i]] += y[i] - prob[i];
      const auto& C = result.basis[static_cast<std::size_t>(j)];
      if (C.cols() > 0)
        g.segment(result.offsets[static_cast<std::size_t>(j)], C.cols()) = C.transpose() * u;
    }

    // full-basis Fisher blocks from joint weighted bin counts
    const double w_total = w.sum();
    Eigen::MatrixXd H0(1, total_bins);  // intercept x bins
    H0.setZero();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(total_bins, total_bins);
    for (int j = 0; j < p; ++j) {
      const auto& bins_j = design.bins[static_cast<std::size_t>(j)];
      const int oj = bin_offsets[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < n; ++i) H0(0, oj + bins_j[i]) += w[i];
      for (Eigen::Index i = 0; i < n; ++i) H(oj + bins_j[i], oj + bins_j[i]) += w[i];
      for (int k = j + 1; k < p; ++k) {
        const auto& bins_k = design.bins[static_cast<std::size_t>(k)];
        const int ok = bin_offsets[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < n; ++i) H(oj + bins_j[i], ok + bins_k[i]) += w[i];
      }
    }

    // project to the reduced basis: F = B^T [H] B with B = blkdiag(1, C_1..C_p)
    fisher_reduced.setZero(m, m);
    fisher_reduced(0, 0) = w_total;
    for (int j = 0; j < p; ++j) {
      const auto& Cj = result.basis[static_cast<std::size_t>(j)];
      if (Cj.cols() == 0) continue;
      const int oj = bin_offsets[static_cast<std::size_t>(j)];
      const int rj = result.offsets[static_cast<std::size_t>(j)];
      fisher_reduced.block(0, rj, 1, Cj.cols()) =
          H0.block(0, oj, 1, nbins[static_cast<std::size_t>(j)]) * Cj;
      fisher_reduced.block(rj, 0, Cj.cols(), 1) =
          fisher_reduced.block(0, rj, 1, Cj.cols()).transpose();
      for (int k = j; k < p; ++k) {
        const auto& Ck = result.basis[static_cast<std::size_t>(k)];
        if (Ck.cols() == 0) continue;
        const int ok = bin_offsets[static_cast<std::size_t>(k)];
        const int rk = result.offsets[static_cast<std::size_t>(k)];
        Eigen::MatrixXd block = Cj.transpose() *
                                H.block(oj, ok, nbins[static_cast<std::size_t>(j)],
                                        nbins[static_cast<std::size_t>(k)]) *
                                Ck;
        fisher_reduced.block(rj, rk, Cj.cols(), Ck.cols()) = block;
        if (k != j)
          fisher_reduced.block(rk, rj, Ck.cols(), Cj.cols()) = block.transpose();
      }
    }
    fisher_reduced.diagonal().array() += options.ridge;
    have_fisher = true;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher_reduced);
    if (ldlt.info() != Eigen::Success) {
      result.converged = false;
      break;
    }
    Eigen::VectorXd delta = ldlt.solve(g);
    if (!delta.allFinite()) {
      result.converged = false;
      break;
    }

    double step = 1.0;
    Eigen::VectorXd beta_new, s_new;
    std::vector<Eigen::VectorXd> theta_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 30; ++half) {
      beta_new = beta + step * delta;
      s_new = scores_of(beta_new, theta_new);
      ll_new = logistic_loglik(s_new, y);
      if (ll_new >= ll - 1e-12) break;
      step *= 0.5;
    }
    if (ll_new < ll - 1e-10) break;

    const double max_change = (step * delta).cwiseAbs().maxCoeff();
    beta = beta_new;
    s = s_new;
    theta = theta_new;
    const double improvement = ll_new - ll;
    ll = ll_new;
    if (max_change < options.tol || improvement < 1e-12) {
      result.converged = true;
      break;
    }
  }

  result.intercept = beta[0];
  result.theta = theta;
  if (have_fisher) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher_reduced);
    if (ldlt.info() == Eigen::Success) {
      result.covariance = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
      if (!result.covariance.allFinite()) result.converged = false;
    } else {
      result.converged = false;
      result.covariance =
          Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
    }
  } else {
    result.covariance = Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

IndicatorDesign indicator_design_of(const GamModel& model, const Table& table) {
  IndicatorDesign design;
  design.n_rows = table.n_rows;
  const Eigen::MatrixXi bins = bin_table(model, table);
  for (int j = 0; j < bins.cols(); ++j) {
    design.bins.push_back(bins.col(j));
    design.bin_counts.push_back(model.shapes[static_cast<std::size_t>(j)].layout.counts);
  }
  return design;
}

}  // namespace missinglens
