#include "missinglens/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "missinglens/irls.hpp"
#include "missinglens/missingness.hpp"
#include "missinglens/parallel.hpp"
#include "missinglens/rng.hpp"
#include "missinglens/stats.hpp"
#include "missinglens/trees.hpp"

namespace missinglens {

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::MCAR: return "MCAR";
    case Mechanism::MAR: return "MAR";
    case Mechanism::MNAR: return "MNAR";
  }
  return "MCAR";
}

std::string to_string(ScoreModel m) {
  switch (m) {
    case ScoreModel::Linear: return "linear";
    case ScoreModel::Curvilinear: return "curvilinear";
    case ScoreModel::Quadratic: return "quadratic";
  }
  return "linear";
}

Mechanism mechanism_from_string(std::string_view s) {
  if (s == "MCAR" || s == "mcar") return Mechanism::MCAR;
  if (s == "MAR" || s == "mar") return Mechanism::MAR;
  if (s == "MNAR" || s == "mnar") return Mechanism::MNAR;
  throw ValueError("unknown mechanism: " + std::string(s));
}

ScoreModel score_model_from_string(std::string_view s) {
  if (s == "linear") return ScoreModel::Linear;
  if (s == "curvilinear") return ScoreModel::Curvilinear;
  if (s == "quadratic") return ScoreModel::Quadratic;
  throw ValueError("unknown score model: " + std::string(s));
}

GenResult gen_missing(const Table& table, const SynthSpec& spec) {
  const Index n = table.n_rows;
  const Column& target = table.column(spec.target_feature);
  if (target.n_missing() > 0)
    throw ValueError("gen_missing: target feature must be fully observed");
  if (spec.p_m <= 0 || spec.p_m >= 1) throw ValueError("gen_missing: p_m must be in (0,1)");
  if (spec.p_m * static_cast<double>(n) < 1.0)
    throw ValueError("gen_missing: p_m * n must be at least 1");

  Rng rng(spec.seed);
  GenResult result;
  result.table = table;
  result.mask.assign(static_cast<std::size_t>(n), 0);

  if (spec.mechanism == Mechanism::MCAR) {
    for (Index i = 0; i < n; ++i)
      if (rng.uniform() < spec.p_m) result.mask[static_cast<std::size_t>(i)] = 1;
  } else {
    // score inputs: continuous/binary feature columns, excluding the outcome
    // column; MAR additionally excludes the target feature itself
    std::vector<int> inputs;
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      const Column& col = table.columns[j];
      if (col.kind == ColumnKind::Categorical) continue;
      if (table.target_index && static_cast<int>(j) == *table.target_index) continue;
      if (spec.mechanism == Mechanism::MAR && col.name == spec.target_feature) continue;
      if (col.n_missing() > 0) continue;
      inputs.push_back(static_cast<int>(j));
    }
    if (inputs.empty()) throw ValueError("gen_missing: no usable score inputs");

    const int p = static_cast<int>(inputs.size());
    Eigen::MatrixXd Z(n, p);
    for (int j = 0; j < p; ++j) {
      const Column& col = table.columns[static_cast<std::size_t>(inputs[j])];
      const double mean = col.values.mean();
      double var = (col.values.array() - mean).square().sum() /
                   std::max<double>(1.0, static_cast<double>(n - 1));
      const double sd = var > 0 ? std::sqrt(var) : 1.0;
      Z.col(j) = (col.values.array() - mean) / sd;
    }

    Eigen::VectorXd w(p);
    for (int j = 0; j < p; ++j) w[j] = rng.normal();
    Eigen::MatrixXd V;
    if (spec.score_model == ScoreModel::Quadratic) {
      V.setZero(p, p);
      for (int j = 0; j < p; ++j)
        for (int k = j; k < p; ++k) V(j, k) = rng.normal();
    }

    Eigen::VectorXd score(n);
    for (Index i = 0; i < n; ++i) {
      double s = 0;
      switch (spec.score_model) {
        case ScoreModel::Linear:
          s = w.dot(Z.row(i));
          break;
        case ScoreModel::Curvilinear:
          for (int j = 0; j < p; ++j) s += w[j] * std::tanh(Z(i, j));
          break;
        case ScoreModel::Quadratic: {
          s = w.dot(Z.row(i));
          for (int j = 0; j < p; ++j)
            for (int k = j; k < p; ++k) s += V(j, k) * Z(i, j) * Z(i, k);
          break;
        }
      }
      score[i] = s + spec.noise_sd * rng.normal();
    }

    const auto quota = static_cast<Index>(std::ceil(spec.p_m * static_cast<double>(n)));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    if (spec.tail == MaskTail::Lowest) {
      std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return score[a] != score[b] ? score[a] < score[b] : a < b;
      });
    } else {
      std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return score[a] != score[b] ? score[a] > score[b] : a < b;
      });
    }
    for (Index k = 0; k < quota; ++k) result.mask[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
  }

  Column& col = result.table.column(spec.target_feature);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < n; ++i) {
    if (result.mask[static_cast<std::size_t>(i)]) {
      col.values[i] = nan;
      col.missing[static_cast<std::size_t>(i)] = 1;
    }
  }
  return result;
}

Table make_surrogate(const SurrogateConfig& config) {
  static const char* kNames[] = {"age",        "heart_rate", "sbp",     "dbp",
                                 "temperature", "resp_rate",  "spo2",    "lactate",
                                 "creatinine",  "urea",       "sodium",  "wbc",
                                 "hemoglobin",  "glucose"};
  const Index n = config.n;
  const int p = config.p;
  if (n < 10) throw ValueError("make_surrogate: n too small");
  if (p < 2) throw ValueError("make_surrogate: need at least 2 features");

  Rng rng(config.seed);
  Eigen::MatrixXd latent(n, p);
  Eigen::VectorXd factor(n);
  Eigen::MatrixXd noise(n, p);
  for (Index i = 0; i < n; ++i) {
    factor[i] = rng.normal();
    for (int j = 0; j < p; ++j) noise(i, j) = rng.normal();
  }
  const double loadings[] = {0.75, 0.6, 0.8, 0.5, 0.7};
  for (int j = 0; j < p; ++j) {
    const double lam = loadings[j % 5];
    latent.col(j) = lam * factor + std::sqrt(1.0 - lam * lam) * noise.col(j);
  }

  Table table;
  table.n_rows = n;
  for (int j = 0; j < p; ++j) {
    Column col;
    col.name = j < 14 ? kNames[j] : "x" + std::to_string(j + 1);
    col.kind = ColumnKind::Continuous;
    col.values.resize(n);
    col.missing.assign(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
      const double z = latent(i, j);
      double v = 0;
      switch (j % 5) {
        case 0: v = 60.0 + 14.0 * z; break;
        case 1: v = 85.0 + 15.0 * z; break;
        case 2: v = 120.0 + 18.0 * z; break;
        case 3: v = 20.0 * std::exp(0.5 * z); break;
        case 4: v = 37.0 + 0.6 * z; break;
      }
      col.values[i] = v;
    }
    table.columns.push_back(std::move(col));
  }

  Column outcome;
  outcome.name = "outcome";
  outcome.kind = ColumnKind::Binary;
  outcome.values.resize(n);
  outcome.missing.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    const double logit_i = 1.6 * factor[i] + 0.35 * noise(i, 1 % p) -
                           0.35 * noise(i, std::min(7, p - 1)) - 0.3;
    outcome.values[i] = rng.uniform() < sigmoid(logit_i) ? 1.0 : 0.0;
  }
  table.columns.push_back(std::move(outcome));
  table.target_index = static_cast<int>(table.columns.size()) - 1;
  return table;
}

AssumedNormalSurrogate make_assumed_normal_surrogate(Index n, std::uint64_t seed) {
  Rng rng(seed);
  AssumedNormalSurrogate out;
  out.feature = "pf_ratio";

  Eigen::VectorXd health(n);
  Eigen::MatrixXd noise(n, 5);
  for (Index i = 0; i < n; ++i) {
    health[i] = rng.normal();
    for (int j = 0; j < 5; ++j) noise(i, j) = rng.normal();
  }

  Table table;
  table.n_rows = n;

  Column pf;
  pf.name = out.feature;
  pf.kind = ColumnKind::Continuous;
  pf.values.resize(n);
  pf.missing.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i)
    pf.values[i] = 340.0 * std::exp(0.45 * health[i] + 0.1 * noise(i, 0));
  table.columns.push_back(pf);

  // weak predictors: they see only a sliver of the health state
  static const char* kMarkers[] = {"marker_a", "marker_b", "marker_c", "marker_d"};
  for (int j = 0; j < 4; ++j) {
    Column col;
    col.name = kMarkers[j];
    col.kind = ColumnKind::Continuous;
    col.values.resize(n);
    col.missing.assign(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i)
      col.values[i] = 50.0 + 10.0 * (0.3 * health[i] + 0.954 * noise(i, j + 1));
    table.columns.push_back(std::move(col));
  }

  Column outcome;
  outcome.name = "outcome";
  outcome.kind = ColumnKind::Binary;
  outcome.values.resize(n);
  outcome.missing.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    const double logit_i = -1.9 * health[i] - 0.6;
    outcome.values[i] = rng.uniform() < sigmoid(logit_i) ? 1.0 : 0.0;
  }
  table.columns.push_back(std::move(outcome));
  table.target_index = static_cast<int>(table.columns.size()) - 1;

  // assumed normal: mostly the healthy rows go unmeasured
  out.mask.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i)
    if (rng.uniform() < sigmoid(2.0 * (health[i] - 0.2))) out.mask[static_cast<std::size_t>(i)] = 1;

  out.table = std::move(table);
  return out;
}

namespace {

Table apply_mask(const Table& base, std::string_view feature,
                 const std::vector<std::uint8_t>& mask) {
  Table out = base;
  Column& col = out.column(feature);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < out.n_rows; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      col.values[i] = nan;
      col.missing[static_cast<std::size_t>(i)] = 1;
    }
  }
  return out;
}

double rate_se(double rate, int reps) {
  return std::sqrt(std::max(rate * (1.0 - rate), 0.0) / std::max(reps, 1));
}

}  // namespace

std::vector<McarBenchCell> run_mcar_benchmark(const Table& base, const McarBenchConfig& config) {
  if (!base.target_index) throw ValueError("run_mcar_benchmark: base table needs a target column");
  if (config.reps < 1) throw ValueError("run_mcar_benchmark: reps must be >= 1");
  const std::string outcome = base.columns[static_cast<std::size_t>(*base.target_index)].name;

  struct Cell {
    Mechanism mech;
    double pm;
  };
  std::vector<Cell> cells;
  for (auto mech : {Mechanism::MCAR, Mechanism::MAR})
    for (double pm : config.pms) cells.push_back({mech, pm});

  const std::size_t total = cells.size() * static_cast<std::size_t>(config.reps);
  std::vector<std::uint8_t> wald_rej(total, 0), little_rej(total, 0);
  const Rng master(config.seed);

  parallel_for(
      total,
      [&](std::size_t task) {
        const std::size_t cell_idx = task / static_cast<std::size_t>(config.reps);
        const Cell& cell = cells[cell_idx];

        SynthSpec spec;
        spec.mechanism = cell.mech;
        spec.p_m = cell.pm;
        spec.score_model = ScoreModel::Linear;
        spec.target_feature = config.target_feature;
        spec.noise_sd = 1.0;
        spec.tail = MaskTail::Lowest;
        spec.seed = master.child(task).next_u64();

        GenResult gen = gen_missing(base, spec);

        LittleReport little = littles_test(gen.table);
        little_rej[task] = little.p_value < config.alpha ? 1 : 0;

        Table encoded =
            encode_missing(gen.table, config.target_feature, MissingEncoding::sentinel_below_min());
        GamConfig gcfg = config.gam;
        gcfg.seed = spec.seed;
        gcfg.link = Link::Logistic;
        GamModel model = fit_gam(encoded, outcome, gcfg);
        WaldReport wald = wald_mcar_test(model, encoded, config.target_feature, config.alpha);
        wald_rej[task] = wald.reject_mcar ? 1 : 0;
      },
      config.n_threads);

  std::vector<McarBenchCell> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    McarBenchCell cell;
    cell.mechanism = cells[c].mech;
    cell.p_m = cells[c].pm;
    cell.reps = config.reps;
    double w = 0, l = 0;
    for (int r = 0; r < config.reps; ++r) {
      const std::size_t task = c * static_cast<std::size_t>(config.reps) + static_cast<std::size_t>(r);
      w += wald_rej[task];
      l += little_rej[task];
    }
    cell.wald_rate = w / config.reps;
    cell.little_rate = l / config.reps;
    cell.wald_se = rate_se(cell.wald_rate, config.reps);
    cell.little_se = rate_se(cell.little_rate, config.reps);
    out.push_back(cell);
  }
  return out;
}

namespace {

struct SplitRows {
  std::vector<Index> train, test;
};

SplitRows stratified_split(const Eigen::VectorXd& labels, double holdout, Rng& rng) {
  SplitRows split;
  std::vector<Index> pos, neg;
  for (Index i = 0; i < labels.size(); ++i) (labels[i] > 0.5 ? pos : neg).push_back(i);
  auto take = [&](std::vector<Index>& rows) {
    rng.shuffle(rows);
    const auto k =
        static_cast<std::size_t>(std::llround(holdout * static_cast<double>(rows.size())));
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i < k ? split.test : split.train).push_back(rows[i]);
  };
  take(pos);
  take(neg);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

double accuracy_of(const Eigen::VectorXd& prob, const Eigen::VectorXd& y) {
  Index correct = 0;
  for (Index i = 0; i < prob.size(); ++i)
    correct += (prob[i] >= 0.5 ? 1.0 : 0.0) == y[i];
  return static_cast<double>(correct) / static_cast<double>(prob.size());
}

}  // namespace

std::vector<PredBenchCell> run_missingness_benchmark(const Table& base,
                                                     const PredBenchConfig& config) {
  if (config.reps < 1) throw ValueError("run_missingness_benchmark: reps must be >= 1");

  struct Cell {
    ScoreModel sm;
    double pm;
  };
  std::vector<Cell> cells;
  for (auto sm : config.score_models)
    for (double pm : config.pms) cells.push_back({sm, pm});

  // input features: everything except the masked feature; the outcome label is
  // included as a predictor
  std::vector<int> input_cols;
  for (std::size_t j = 0; j < base.columns.size(); ++j) {
    if (base.columns[j].name == config.target_feature) continue;
    if (base.columns[j].kind == ColumnKind::Categorical) continue;
    input_cols.push_back(static_cast<int>(j));
  }
  const int p = static_cast<int>(input_cols.size());
  if (p < 1) throw ValueError("run_missingness_benchmark: no input features");

  const std::size_t total = cells.size() * static_cast<std::size_t>(config.reps);
  struct RepResult {
    double ebm = 0, lr = 0, rf = 0, knn = 0;
  };
  std::vector<RepResult> results(total);
  const Rng master(config.seed);

  parallel_for(
      total,
      [&](std::size_t task) {
        const std::size_t cell_idx = task / static_cast<std::size_t>(config.reps);
        const Cell& cell = cells[cell_idx];
        const std::uint64_t rep_seed = master.child(task).next_u64();

        SynthSpec spec;
        spec.mechanism = config.mechanism;
        spec.p_m = cell.pm;
        spec.score_model = cell.sm;
        spec.target_feature = config.target_feature;
        spec.noise_sd = 1.0;
        spec.tail = MaskTail::Highest;
        spec.seed = rep_seed;
        GenResult gen = gen_missing(base, spec);

        const Index n = base.n_rows;
        Eigen::VectorXd y(n);
        for (Index i = 0; i < n; ++i) y[i] = gen.mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

        Eigen::MatrixXd X(n, p);
        for (int j = 0; j < p; ++j)
          X.col(j) = base.columns[static_cast<std::size_t>(input_cols[j])].values;

        Rng rng(master.child(task ^ 0x5b1ce5ULL).next_u64());
        SplitRows split = stratified_split(y, config.holdout_fraction, rng);
        const auto n_tr = static_cast<Eigen::Index>(split.train.size());
        const auto n_te = static_cast<Eigen::Index>(split.test.size());

        Eigen::MatrixXd Xtr(n_tr, p), Xte(n_te, p);
        Eigen::VectorXd ytr(n_tr), yte(n_te);
        for (Eigen::Index i = 0; i < n_tr; ++i) {
          Xtr.row(i) = X.row(split.train[static_cast<std::size_t>(i)]);
          ytr[i] = y[split.train[static_cast<std::size_t>(i)]];
        }
        for (Eigen::Index i = 0; i < n_te; ++i) {
          Xte.row(i) = X.row(split.test[static_cast<std::size_t>(i)]);
          yte[i] = y[split.test[static_cast<std::size_t>(i)]];
        }

        // standardize by training statistics for LR and KNN
        Eigen::VectorXd mean(p), sd(p);
        for (int j = 0; j < p; ++j) {
          mean[j] = Xtr.col(j).mean();
          double var = (Xtr.col(j).array() - mean[j]).square().sum() /
                       std::max<double>(1.0, static_cast<double>(n_tr - 1));
          sd[j] = var > 0 ? std::sqrt(var) : 1.0;
        }
        Eigen::MatrixXd Ztr = (Xtr.rowwise() - mean.transpose()).array().rowwise() /
                              sd.transpose().array();
        Eigen::MatrixXd Zte = (Xte.rowwise() - mean.transpose()).array().rowwise() /
                              sd.transpose().array();

        // EBM
        {
          Table train_table, test_table;
          train_table.n_rows = n_tr;
          test_table.n_rows = n_te;
          for (int j = 0; j < p; ++j) {
            Column col;
            col.name = base.columns[static_cast<std::size_t>(input_cols[j])].name;
            col.kind = ColumnKind::Continuous;
            col.values = Xtr.col(j);
            col.missing.assign(static_cast<std::size_t>(n_tr), 0);
            train_table.columns.push_back(col);
            col.values = Xte.col(j);
            col.missing.assign(static_cast<std::size_t>(n_te), 0);
            test_table.columns.push_back(std::move(col));
          }
          Column ycol;
          ycol.name = "missing_flag";
          ycol.kind = ColumnKind::Binary;
          ycol.values = ytr;
          ycol.missing.assign(static_cast<std::size_t>(n_tr), 0);
          train_table.columns.push_back(ycol);

          GamConfig gcfg = config.gam;
          gcfg.seed = rep_seed;
          gcfg.link = Link::Logistic;
          GamModel model = fit_gam(train_table, "missing_flag", gcfg);
          Eigen::VectorXd prob = predict_probabilities(model, test_table);
          results[task].ebm = accuracy_of(prob, yte);
        }

        // logistic regression (IRLS)
        {
          Eigen::MatrixXd design(n_tr, p + 1);
          design.col(0).setOnes();
          design.rightCols(p) = Ztr;
          IrlsDenseResult fit = irls_logistic(design, ytr);
          Eigen::VectorXd prob(n_te);
          for (Eigen::Index i = 0; i < n_te; ++i) {
            double s = fit.beta[0];
            for (int j = 0; j < p; ++j) s += fit.beta[j + 1] * Zte(i, j);
            prob[i] = sigmoid(s);
          }
          results[task].lr = accuracy_of(prob, yte);
        }

        // random forest (mode vote)
        {
          ForestConfig fc;
          fc.n_trees = config.rf_trees;
          fc.seed = rep_seed;
          fc.categorical_target = true;
          fc.n_threads = 1;
          std::vector<bool> cat(static_cast<std::size_t>(p), false);
          RandomForest forest = fit_random_forest(Xtr, ytr, cat, fc);
          Eigen::VectorXd pred = forest.predict(Xte);
          Index correct = 0;
          for (Eigen::Index i = 0; i < n_te; ++i) correct += pred[i] == yte[i];
          results[task].rf = static_cast<double>(correct) / static_cast<double>(n_te);
        }

        // KNN majority vote over standardized Euclidean distance
        {
          Eigen::VectorXd prob(n_te);
          for (Eigen::Index i = 0; i < n_te; ++i) {
            std::vector<std::pair<double, Eigen::Index>> dist;
            dist.reserve(static_cast<std::size_t>(n_tr));
            for (Eigen::Index t = 0; t < n_tr; ++t) {
              const double d = (Zte.row(i) - Ztr.row(t)).squaredNorm();
              dist.emplace_back(d, t);
            }
            const int k = std::min<int>(config.knn_k, static_cast<int>(n_tr));
            std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
            double votes = 0;
            for (int v = 0; v < k; ++v) votes += ytr[dist[static_cast<std::size_t>(v)].second];
            prob[i] = votes / static_cast<double>(k);
          }
          results[task].knn = accuracy_of(prob, yte);
        }
      },
      config.n_threads);

  std::vector<PredBenchCell> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    PredBenchCell cell;
    cell.mechanism = config.mechanism;
    cell.score_model = cells[c].sm;
    cell.p_m = cells[c].pm;
    cell.reps = config.reps;
    auto fill = [&](auto getter, PredBenchEntry& entry) {
      double sum = 0, sq = 0;
      for (int r = 0; r < config.reps; ++r) {
        const double v =
            getter(results[c * static_cast<std::size_t>(config.reps) + static_cast<std::size_t>(r)]);
        sum += v;
        sq += v * v;
      }
      entry.mean = sum / config.reps;
      const double var =
          std::max(0.0, sq / config.reps - entry.mean * entry.mean);
      entry.sd = std::sqrt(var);
    };
    fill([](const RepResult& r) { return r.ebm; }, cell.ebm);
    fill([](const RepResult& r) { return r.lr; }, cell.lr);
    fill([](const RepResult& r) { return r.rf; }, cell.rf);
    fill([](const RepResult& r) { return r.knn; }, cell.knn);
    out.push_back(cell);
  }
  return out;
}

}  // namespace missinglens
