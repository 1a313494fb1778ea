#include "missinglens/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "missinglens/irls.hpp"
#include "missinglens/rng.hpp"
#include "missinglens/stats.hpp"

namespace missinglens {

WaldReport wald_mcar_test(const GamModel& model, const Table& training_table,
                          std::string_view feature, double alpha) {
  if (alpha <= 0 || alpha >= 1) throw ValueError("wald_mcar_test: alpha must be in (0,1)");
  if (model.link != Link::Logistic)
    throw ValueError("wald_mcar_test: model must use the logistic link");
  const int fidx = model.feature_index(feature);
  if (fidx < 0) throw SchemaError("wald_mcar_test: model has no feature " + std::string(feature));
  const ShapeFunction& shape = model.shapes[static_cast<std::size_t>(fidx)];
  if (!shape.layout.missing_bin)
    throw NothingToTest("nothing to test: feature " + std::string(feature) +
                        " has no missing bin");
  const int mbin = *shape.layout.missing_bin;

  WaldReport report;
  report.feature = std::string(feature);
  report.alpha = alpha;
  report.theta_hat = shape.scores[mbin];
  report.missing_count = shape.layout.counts[mbin];

  // SE from an IRLS refit on the frozen indicator design, warm-started at the
  // model's own scores.
  IndicatorDesign design = indicator_design_of(model, training_table);
  std::vector<Eigen::VectorXd> warm;
  warm.reserve(model.shapes.size());
  for (const auto& s : model.shapes) warm.push_back(s.scores);
  const Column& tcol = training_table.column(model.target);
  IndicatorIrlsResult irls =
      irls_indicator_logistic(design, tcol.values, model.intercept, warm);

  double se = irls.converged ? irls.se(fidx, mbin) : std::numeric_limits<double>::infinity();
  if (!std::isfinite(se) || se <= 0) {
    report.se = std::numeric_limits<double>::infinity();
    report.z = 0;
    report.p_value = 1.0;
    report.reject_mcar = false;
    report.converged = false;
    return report;
  }
  report.converged = irls.converged;
  report.se = se;
  report.z = report.theta_hat / se;
  report.p_value = normal_two_sided_p(report.z);
  report.reject_mcar = report.p_value < alpha;
  return report;
}

namespace {

struct Pattern {
  std::vector<int> observed;  // variable indices observed in this pattern
  std::vector<Index> rows;
};

}  // namespace

LittleReport littles_test(const Table& table) {
  std::vector<int> cols;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (table.columns[j].kind == ColumnKind::Continuous) cols.push_back(static_cast<int>(j));
  }
  const int p = static_cast<int>(cols.size());
  if (p < 2) throw ValueError("littles_test: need at least 2 continuous columns");

  // standardize by observed mean/sd: the statistic is affine-invariant and
  // the EM stays well-conditioned
  const Index n_all = table.n_rows;
  Eigen::MatrixXd X(n_all, p);
  Eigen::MatrixXd miss(n_all, p);
  for (int j = 0; j < p; ++j) {
    const Column& col = table.columns[static_cast<std::size_t>(cols[j])];
    double mean = 0, sq = 0;
    Index m = 0;
    for (Index i = 0; i < n_all; ++i) {
      if (!col.is_missing(i)) {
        mean += col.values[i];
        ++m;
      }
    }
    if (m == 0) throw ValueError("littles_test: column " + col.name + " has no observed values");
    mean /= static_cast<double>(m);
    for (Index i = 0; i < n_all; ++i)
      if (!col.is_missing(i)) sq += (col.values[i] - mean) * (col.values[i] - mean);
    const double sd = m > 1 ? std::sqrt(sq / static_cast<double>(m - 1)) : 1.0;
    const double scale = sd > 0 ? sd : 1.0;
    for (Index i = 0; i < n_all; ++i) {
      miss(i, j) = col.is_missing(i) ? 1.0 : 0.0;
      X(i, j) = col.is_missing(i) ? 0.0 : (col.values[i] - mean) / scale;
    }
  }

  // group rows by missingness pattern; rows with nothing observed carry no
  // information about the means
  std::map<std::vector<bool>, Pattern> patterns;
  Index n = 0;
  for (Index i = 0; i < n_all; ++i) {
    std::vector<bool> key(static_cast<std::size_t>(p));
    int n_obs = 0;
    for (int j = 0; j < p; ++j) {
      key[static_cast<std::size_t>(j)] = miss(i, j) > 0;
      if (miss(i, j) == 0) ++n_obs;
    }
    if (n_obs == 0) continue;
    auto& pat = patterns[key];
    if (pat.observed.empty()) {
      for (int j = 0; j < p; ++j)
        if (!key[static_cast<std::size_t>(j)]) pat.observed.push_back(j);
    }
    pat.rows.push_back(i);
    ++n;
  }

  LittleReport report;
  report.n_patterns = static_cast<int>(patterns.size());

  int df = -p;
  for (const auto& [key, pat] : patterns) df += static_cast<int>(pat.observed.size());
  report.df = std::max(df, 0);

  if (df <= 0) {  // complete data (or a single observed pattern)
    report.nothing_to_test = true;
    report.p_value = 1.0;
    report.chi2 = 0.0;
    return report;
  }

  // EM for the grand mean and ML covariance under multivariate normality
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p);
  {
    // observed-data initialization
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(p), counts = Eigen::VectorXd::Zero(p);
    for (const auto& [key, pat] : patterns) {
      for (auto i : pat.rows)
        for (int j : pat.observed) {
          sums[j] += X(i, j);
          counts[j] += 1;
        }
    }
    for (int j = 0; j < p; ++j) mu[j] = counts[j] > 0 ? sums[j] / counts[j] : 0.0;
  }

  const int max_iter = 100;
  const double tol = 1e-6;
  report.em_converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    report.em_iterations = iter + 1;
    Eigen::VectorXd t1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(p, p);
    for (const auto& [key, pat] : patterns) {
      const int q = static_cast<int>(pat.observed.size());
      std::vector<int> missing_vars;
      for (int j = 0; j < p; ++j)
        if (key[static_cast<std::size_t>(j)]) missing_vars.push_back(j);
      const int r = static_cast<int>(missing_vars.size());

      Eigen::MatrixXd Soo(q, q);
      for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) Soo(a, b) = sigma(pat.observed[a], pat.observed[b]);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Soo);

      Eigen::MatrixXd Smo(r, q);  // missing x observed
      Eigen::MatrixXd Smm(r, r);
      for (int a = 0; a < r; ++a) {
        for (int b = 0; b < q; ++b) Smo(a, b) = sigma(missing_vars[a], pat.observed[b]);
        for (int b = 0; b < r; ++b) Smm(a, b) = sigma(missing_vars[a], missing_vars[b]);
      }
      Eigen::MatrixXd reg, cond_cov;
      if (r > 0) {
        reg = ldlt.solve(Smo.transpose());
        cond_cov = Smm - Smo * reg;
      }

      for (auto i : pat.rows) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd xo(q);
        for (int a = 0; a < q; ++a) {
          xo[a] = X(i, pat.observed[a]);
          x[pat.observed[a]] = xo[a];
        }
        if (r > 0) {
          Eigen::VectorXd dev(q);
          for (int a = 0; a < q; ++a) dev[a] = xo[a] - mu[pat.observed[a]];
          Eigen::VectorXd xm = reg.transpose() * dev;
          for (int a = 0; a < r; ++a) x[missing_vars[a]] = mu[missing_vars[a]] + xm[a];
        }
        t1 += x;
        t2 += x * x.transpose();
        for (int a = 0; a < r; ++a)
          for (int b = 0; b < r; ++b) t2(missing_vars[a], missing_vars[b]) += cond_cov(a, b);
      }
    }
    Eigen::VectorXd mu_new = t1 / static_cast<double>(n);
    Eigen::MatrixXd sigma_new = t2 / static_cast<double>(n) - mu_new * mu_new.transpose();
    sigma_new = 0.5 * (sigma_new + sigma_new.transpose());

    const double dmu = (mu_new - mu).cwiseAbs().maxCoeff();
    const double dsig = (sigma_new - sigma).cwiseAbs().maxCoeff();
    mu = mu_new;
    sigma = sigma_new;
    if (dmu < tol && dsig < tol) {
      report.em_converged = true;
      break;
    }
  }

  // d^2 = sum over patterns of m_pat (ybar - mu)' Sigma_oo^{-1} (ybar - mu)
  double d2 = 0;
  for (const auto& [key, pat] : patterns) {
    const int q = static_cast<int>(pat.observed.size());
    Eigen::VectorXd ybar = Eigen::VectorXd::Zero(q);
    for (auto i : pat.rows)
      for (int a = 0; a < q; ++a) ybar[a] += X(i, pat.observed[a]);
    ybar /= static_cast<double>(pat.rows.size());
    Eigen::VectorXd diff(q);
    for (int a = 0; a < q; ++a) diff[a] = ybar[a] - mu[pat.observed[a]];
    Eigen::MatrixXd Soo(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) Soo(a, b) = sigma(pat.observed[a], pat.observed[b]);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Soo);
    Eigen::VectorXd solved;
    if (ldlt.info() == Eigen::Success) solved = ldlt.solve(diff);
    if (ldlt.info() != Eigen::Success || !solved.allFinite()) {
      Soo.diagonal().array() += 1e-8;
      report.singular_adjusted = true;
      solved = Soo.ldlt().solve(diff);
    }
    d2 += static_cast<double>(pat.rows.size()) * diff.dot(solved);
  }
  report.chi2 = std::max(d2, 0.0);
  report.p_value = chi2_sf(report.chi2, report.df);
  return report;
}

double auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const Eigen::Index n = scores.size();
  if (labels.size() != n) throw ValueError("auc: scores/labels length mismatch");
  Index n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] > 0.5) ++n_pos;
    else ++n_neg;
  }
  if (n_pos == 0 || n_neg == 0) throw ValueError("auc: both classes must be present");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

  // rank sum of positives with average ranks over ties
  double rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t k = i;
    while (k + 1 < order.size() && scores[order[k + 1]] == scores[order[i]]) ++k;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(k + 1));
    for (std::size_t t = i; t <= k; ++t)
      if (labels[order[t]] > 0.5) rank_sum += avg_rank;
    i = k + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

namespace {

// Separated binning of one feature: observed cells keep their own quantile
// bins; rows in `imputed_rows` get bins built from `imputed_values`, appended
// after the observed bins. Assignments are computed on the original axis, so
// no floating-point offset round-trip is involved.
struct SeparatedFeature {
  BinLayout layout;
  Eigen::VectorXi bins;
};

BinLayout layout_from_values(const Eigen::VectorXd& values, int max_bins) {
  Column tmp;
  tmp.name = "tmp";
  tmp.kind = ColumnKind::Continuous;
  tmp.values = values;
  tmp.missing.assign(static_cast<std::size_t>(values.size()), 0);
  return build_bins(tmp, max_bins);
}

SeparatedFeature build_separated(const Column& col, const Eigen::VectorXd& imputed_values,
                                 int max_bins) {
  const Index n = col.n();
  std::vector<Index> missing_rows;
  std::vector<double> observed;
  for (Index i = 0; i < n; ++i) {
    if (col.is_missing(i)) missing_rows.push_back(i);
    else observed.push_back(col.values[i]);
  }
  if (static_cast<Index>(missing_rows.size()) != imputed_values.size())
    throw ValueError("separated encoding: imputed values must align with the missing cells of " +
                     col.name);
  if (observed.empty())
    throw ValueError("separated encoding: column " + col.name + " has no observed values");

  Eigen::VectorXd obs =
      Eigen::Map<Eigen::VectorXd>(observed.data(), static_cast<Eigen::Index>(observed.size()));
  BinLayout obs_layout = layout_from_values(obs, max_bins);
  const int n_obs_bins = static_cast<int>(obs_layout.edges.size()) - 1;

  SeparatedFeature out;
  out.bins.resize(n);

  if (missing_rows.empty()) {
    out.layout = obs_layout;
    for (Index i = 0; i < n; ++i) out.bins[i] = obs_layout.value_bin_of(col.values[i]);
    return out;
  }

  BinLayout imp_layout = layout_from_values(imputed_values, max_bins);
  const int n_imp_bins = static_cast<int>(imp_layout.edges.size()) - 1;

  const double obs_max = obs.maxCoeff();
  const double obs_min = obs.minCoeff();
  const double offset = obs_max + 1.0 + (obs_max - obs_min);

  out.layout.categorical = false;
  out.layout.edges = obs_layout.edges;
  out.layout.imputed_edges = imp_layout.edges;
  out.layout.separation_offset = offset;
  out.layout.separation_boundary = n_obs_bins;
  out.layout.counts = Eigen::VectorXd::Zero(n_obs_bins + n_imp_bins);
  out.layout.counts.head(n_obs_bins) = obs_layout.counts;
  out.layout.counts.tail(n_imp_bins) = imp_layout.counts;

  std::size_t next_missing = 0;
  for (Index i = 0; i < n; ++i) {
    if (col.is_missing(i)) {
      out.bins[i] = n_obs_bins + imp_layout.value_bin_of(imputed_values[
          static_cast<Eigen::Index>(next_missing)]);
      ++next_missing;
    } else {
      out.bins[i] = obs_layout.value_bin_of(col.values[i]);
    }
  }
  return out;
}

}  // namespace

SeparatedShapeCurves split_separated_shape(const ShapeFunction& shape) {
  SeparatedShapeCurves curves;
  const BinLayout& layout = shape.layout;
  const int n_obs = static_cast<int>(layout.edges.size()) - 1;
  for (int b = 0; b < n_obs; ++b) {
    curves.observed.push_back(
        {layout.edges[b], layout.edges[b + 1], shape.scores[b], layout.counts[b]});
  }
  if (layout.separation_offset) {
    curves.offset = *layout.separation_offset;
    const int n_imp = static_cast<int>(layout.imputed_edges.size()) - 1;
    for (int b = 0; b < n_imp; ++b) {
      curves.imputed.push_back({layout.imputed_edges[b], layout.imputed_edges[b + 1],
                                shape.scores[n_obs + b], layout.counts[n_obs + b]});
    }
  }
  return curves;
}

SeparatedShapeCurves separated_shape(const Table& table, std::string_view feature,
                                     const Eigen::VectorXd& imputed_values,
                                     std::string_view target, const GamConfig& config) {
  const Column& fcol = table.column(feature);
  const Column& tcol = table.column(target);
  (void)tcol;

  std::vector<std::string> names;
  std::vector<BinLayout> layouts;
  std::vector<Eigen::VectorXi> assignments;
  for (const auto& col : table.columns) {
    if (col.name == target) continue;
    if (col.name == feature) {
      SeparatedFeature sep = build_separated(fcol, imputed_values, config.max_bins);
      names.push_back(col.name);
      layouts.push_back(sep.layout);
      assignments.push_back(sep.bins);
    } else {
      BinLayout layout = build_bins(col, config.max_bins);
      Eigen::VectorXi idx(table.n_rows);
      for (Index i = 0; i < table.n_rows; ++i)
        idx[i] = layout.bin_of(col.values[i], col.is_missing(i));
      names.push_back(col.name);
      layouts.push_back(std::move(layout));
      assignments.push_back(std::move(idx));
    }
  }
  Eigen::MatrixXi bins(table.n_rows, static_cast<Eigen::Index>(assignments.size()));
  for (std::size_t j = 0; j < assignments.size(); ++j) bins.col(static_cast<Eigen::Index>(j)) = assignments[j];

  GamModel model = fit_gam_prebinned(table, target, config, names, layouts, bins);
  return split_separated_shape(model.shape(feature));
}

MissingnessReport fit_missingness_model(const Table& table, std::string_view feature,
                                        bool include_label, const MissingnessConfig& config) {
  const Column& fcol = table.column(feature);
  const Index n = table.n_rows;
  Column indicator = missingness_indicator(table, feature);
  Index n_pos = 0;
  for (Index i = 0; i < n; ++i) n_pos += indicator.values[i] > 0.5;
  if (n_pos == 0 || n_pos == n)
    throw ValueError("fit_missingness_model: the missingness indicator of " +
                     std::string(feature) + " is constant");
  (void)fcol;

  // inputs: every other column; optionally drop the table's own target
  std::vector<int> input_cols;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    const auto& col = table.columns[j];
    if (col.name == feature) continue;
    if (!include_label && table.target_index && static_cast<int>(j) == *table.target_index)
      continue;
    input_cols.push_back(static_cast<int>(j));
  }
  if (input_cols.empty()) throw ValueError("fit_missingness_model: no input features");

  // encode inputs: continuous with missing -> mean-imputed offset-separated
  // bins; categorical with missing -> separate category
  std::vector<std::string> names;
  std::vector<BinLayout> layouts;
  std::vector<Eigen::VectorXi> assignments;
  std::vector<bool> separated_flag;
  for (int cidx : input_cols) {
    const Column& col = table.columns[static_cast<std::size_t>(cidx)];
    if (col.kind != ColumnKind::Categorical && col.n_missing() > 0) {
      double mean = col.observed_values().mean();
      Eigen::VectorXd imputed = Eigen::VectorXd::Constant(col.n_missing(), mean);
      SeparatedFeature sep = build_separated(col, imputed, config.gam.max_bins);
      names.push_back(col.name);
      layouts.push_back(sep.layout);
      assignments.push_back(sep.bins);
      separated_flag.push_back(true);
    } else {
      Column encoded = col;
      if (col.kind == ColumnKind::Categorical && col.n_missing() > 0) {
        Table tmp;
        tmp.n_rows = n;
        tmp.columns = {col};
        tmp = encode_missing(tmp, col.name, MissingEncoding::separate_category());
        encoded = tmp.columns[0];
      }
      BinLayout layout = build_bins(encoded, config.gam.max_bins);
      Eigen::VectorXi idx(n);
      for (Index i = 0; i < n; ++i)
        idx[i] = layout.bin_of(encoded.values[i], encoded.is_missing(i));
      names.push_back(col.name);
      layouts.push_back(std::move(layout));
      assignments.push_back(std::move(idx));
      separated_flag.push_back(false);
    }
  }

  // stratified holdout on the indicator
  Rng rng(config.seed);
  std::vector<Index> pos, neg;
  for (Index i = 0; i < n; ++i) (indicator.values[i] > 0.5 ? pos : neg).push_back(i);
  std::vector<Index> train_rows, test_rows;
  auto take = [&](std::vector<Index>& rows) {
    rng.shuffle(rows);
    const auto k = static_cast<std::size_t>(
        std::llround(config.holdout_fraction * static_cast<double>(rows.size())));
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i < k ? test_rows : train_rows).push_back(rows[i]);
  };
  take(pos);
  take(neg);
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  // train table: indicator target only; features ride via prebinned indices
  Table train_table;
  train_table.n_rows = static_cast<Index>(train_rows.size());
  Column ycol = indicator;
  ycol.values.resize(train_table.n_rows);
  ycol.missing.assign(static_cast<std::size_t>(train_table.n_rows), 0);
  for (std::size_t i = 0; i < train_rows.size(); ++i)
    ycol.values[static_cast<Index>(i)] = indicator.values[train_rows[i]];
  train_table.columns = {ycol};

  Eigen::MatrixXi train_bins(train_table.n_rows, static_cast<Eigen::Index>(names.size()));
  std::vector<BinLayout> train_layouts = layouts;
  for (std::size_t j = 0; j < names.size(); ++j) {
    train_layouts[j].counts.setZero();
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      const int b = assignments[j][train_rows[i]];
      train_bins(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b;
      train_layouts[j].counts[b] += 1.0;
    }
  }

  GamConfig gam_cfg = config.gam;
  gam_cfg.link = Link::Logistic;
  GamModel model =
      fit_gam_prebinned(train_table, ycol.name, gam_cfg, names, train_layouts, train_bins);

  // held-out metrics
  MissingnessReport report;
  report.feature = std::string(feature);
  report.n_test = static_cast<Index>(test_rows.size());
  Eigen::VectorXd test_scores(report.n_test), test_labels(report.n_test);
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    double s = model.intercept;
    for (std::size_t j = 0; j < names.size(); ++j)
      s += model.shapes[j].scores[assignments[j][test_rows[i]]];
    test_scores[static_cast<Index>(i)] = s;
    test_labels[static_cast<Index>(i)] = indicator.values[test_rows[i]];
  }
  report.auc_value = auc(test_scores, test_labels);
  Index correct = 0;
  for (Index i = 0; i < report.n_test; ++i) {
    const int pred = sigmoid(test_scores[i]) >= 0.5 ? 1 : 0;
    correct += pred == static_cast<int>(test_labels[i]);
  }
  report.accuracy =
      report.n_test > 0 ? static_cast<double>(correct) / static_cast<double>(report.n_test) : 0.0;
  report.top_predictors = variable_importance(model);

  for (std::size_t j = 0; j < names.size(); ++j) {
    if (separated_flag[j])
      report.separated_shapes[names[j]] = split_separated_shape(model.shapes[j]);
  }
  report.model = std::move(model);
  return report;
}

}  // namespace missinglens
