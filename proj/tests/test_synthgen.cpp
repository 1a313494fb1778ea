#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "missinglens/rng.hpp"
#include "missinglens/synthgen.hpp"
#include "missinglens/table.hpp"

using namespace missinglens;

TEST_CASE("surrogate generator is deterministic and well-formed") {
  SurrogateConfig cfg;
  cfg.n = 600;
  cfg.p = 8;
  cfg.seed = 42;
  Table a = make_surrogate(cfg);
  Table b = make_surrogate(cfg);
  REQUIRE(a.n_rows == 600);
  REQUIRE(a.columns.size() == 9);
  REQUIRE(a.target_index.has_value());
  CHECK(a.columns[static_cast<std::size_t>(*a.target_index)].name == "outcome");
  CHECK(a.columns[static_cast<std::size_t>(*a.target_index)].kind == ColumnKind::Binary);

  bool has0 = false, has1 = false;
  for (Index i = 0; i < a.n_rows; ++i) {
    const double y = a.columns.back().values[i];
    has0 = has0 || y == 0.0;
    has1 = has1 || y == 1.0;
  }
  CHECK(has0);
  CHECK(has1);

  for (std::size_t j = 0; j < a.columns.size(); ++j) {
    CHECK(a.columns[j].n_missing() == 0);
    for (Index i = 0; i < a.n_rows; ++i) CHECK(a.columns[j].values[i] == b.columns[j].values[i]);
  }
}

TEST_CASE("MCAR masking matches the Bernoulli rate") {
  SurrogateConfig cfg;
  cfg.n = 10000;
  cfg.p = 4;
  cfg.seed = 3;
  Table base = make_surrogate(cfg);
  SynthSpec spec;
  spec.mechanism = Mechanism::MCAR;
  spec.p_m = 0.2;
  spec.target_feature = "age";
  spec.seed = 5;
  GenResult gen = gen_missing(base, spec);
  double frac = 0;
  for (auto m : gen.mask) frac += m;
  frac /= static_cast<double>(cfg.n);
  CHECK(std::abs(frac - 0.2) <= 0.012);  // 3 sigma
  CHECK(gen.table.column("age").n_missing() == static_cast<Index>(std::lround(frac * cfg.n)));
}

TEST_CASE("MAR masks exactly the quota at the low extreme") {
  SurrogateConfig cfg;
  cfg.n = 1000;
  cfg.p = 6;
  cfg.seed = 8;
  Table base = make_surrogate(cfg);
  SynthSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.p_m = 0.1;
  spec.target_feature = "age";
  spec.seed = 21;
  GenResult gen = gen_missing(base, spec);
  Index count = 0;
  for (auto m : gen.mask) count += m;
  CHECK(count == 100);  // ceil(1000 * 0.1)
}

TEST_CASE("MAR masks are a deterministic function of the other features") {
  SurrogateConfig cfg;
  cfg.n = 500;
  cfg.p = 5;
  cfg.seed = 4;
  Table base = make_surrogate(cfg);

  // shuffling the target feature's values must not change the mask when
  // noise is disabled: the score sees only the other features
  Table shuffled = base;
  {
    Column& col = shuffled.column("age");
    std::vector<double> v(col.values.data(), col.values.data() + col.values.size());
    Rng rng(99);
    rng.shuffle(v);
    col.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  SynthSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.p_m = 0.2;
  spec.target_feature = "age";
  spec.noise_sd = 0.0;
  spec.seed = 31;
  GenResult a = gen_missing(base, spec);
  GenResult b = gen_missing(shuffled, spec);
  CHECK(a.mask == b.mask);
}

TEST_CASE("MNAR with a single input feature masks an extreme of that feature") {
  // two columns: the target feature and the outcome; MNAR scores see only the
  // target feature, so with zero noise the mask is one of its extremes
  Rng rng(12);
  Table t;
  t.n_rows = 400;
  Column v;
  v.name = "v";
  v.kind = ColumnKind::Continuous;
  v.values.resize(400);
  v.missing.assign(400, 0);
  for (Index i = 0; i < 400; ++i) v.values[i] = rng.normal() * 3 + 50;
  t.columns.push_back(v);
  Column y;
  y.name = "y";
  y.kind = ColumnKind::Binary;
  y.values.resize(400);
  y.missing.assign(400, 0);
  for (Index i = 0; i < 400; ++i) y.values[i] = rng.uniform() < 0.5 ? 1 : 0;
  t.columns.push_back(y);
  t.target_index = 1;

  SynthSpec spec;
  spec.mechanism = Mechanism::MNAR;
  spec.p_m = 0.1;
  spec.target_feature = "v";
  spec.noise_sd = 0.0;
  spec.seed = 17;
  GenResult gen = gen_missing(t, spec);

  std::vector<Index> order(400);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return v.values[a] < v.values[b]; });
  std::set<Index> lowest(order.begin(), order.begin() + 40);
  std::set<Index> highest(order.end() - 40, order.end());
  std::set<Index> masked;
  for (Index i = 0; i < 400; ++i)
    if (gen.mask[static_cast<std::size_t>(i)]) masked.insert(i);
  CHECK((masked == lowest || masked == highest));
}

TEST_CASE("gen_missing is seed-deterministic and validates inputs") {
  SurrogateConfig cfg;
  cfg.n = 300;
  cfg.p = 4;
  cfg.seed = 6;
  Table base = make_surrogate(cfg);
  SynthSpec spec;
  spec.mechanism = Mechanism::MAR;
  spec.p_m = 0.25;
  spec.target_feature = "age";
  spec.seed = 11;
  GenResult a = gen_missing(base, spec);
  GenResult b = gen_missing(base, spec);
  CHECK(a.mask == b.mask);

  spec.p_m = 1e-5;
  CHECK_THROWS_AS(gen_missing(base, spec), ValueError);  // quota below one row
  spec.p_m = 0.2;
  spec.target_feature = "age";
  GenResult masked_once = gen_missing(base, spec);
  CHECK_THROWS_AS(gen_missing(masked_once.table, spec), ValueError);  // already missing
}

TEST_CASE("assumed-normal surrogate hides the healthy tail") {
  AssumedNormalSurrogate surrogate = make_assumed_normal_surrogate(2000, 3);
  const Column& pf = surrogate.table.column(surrogate.feature);
  double miss_sum = 0, obs_sum = 0;
  Index miss_n = 0, obs_n = 0;
  for (Index i = 0; i < surrogate.table.n_rows; ++i) {
    if (surrogate.mask[static_cast<std::size_t>(i)]) {
      miss_sum += pf.values[i];
      ++miss_n;
    } else {
      obs_sum += pf.values[i];
      ++obs_n;
    }
  }
  REQUIRE(miss_n > 100);
  REQUIRE(obs_n > 100);
  CHECK(miss_sum / miss_n > obs_sum / obs_n);  // the missing group is healthier
  const double rate = static_cast<double>(miss_n) / static_cast<double>(surrogate.table.n_rows);
  CHECK(rate > 0.2);
  CHECK(rate < 0.6);
}

TEST_CASE("mcar benchmark smoke run emits sane cells") {
  SurrogateConfig scfg;
  scfg.n = 400;
  scfg.p = 5;
  scfg.seed = 7;
  Table base = make_surrogate(scfg);
  McarBenchConfig cfg;
  cfg.reps = 3;
  cfg.pms = {0.2};
  cfg.gam.rounds = 40;
  cfg.gam.max_bins = 16;
  cfg.n_threads = 2;
  auto cells = run_mcar_benchmark(base, cfg);
  REQUIRE(cells.size() == 2);  // MCAR + MAR
  for (const auto& cell : cells) {
    CHECK(cell.reps == 3);
    CHECK(cell.wald_rate >= 0.0);
    CHECK(cell.wald_rate <= 1.0);
    CHECK(cell.little_rate >= 0.0);
    CHECK(cell.little_rate <= 1.0);
  }

  // degenerate threshold: everything rejects
  cfg.alpha = 1.0;
  auto degenerate = run_mcar_benchmark(base, cfg);
  for (const auto& cell : degenerate) {
    CHECK(cell.wald_rate == 1.0);
    CHECK(cell.little_rate == 1.0);
  }
}

TEST_CASE("missingness benchmark under MCAR hovers at majority accuracy") {
  SurrogateConfig scfg;
  scfg.n = 600;
  scfg.p = 5;
  scfg.seed = 13;
  Table base = make_surrogate(scfg);
  PredBenchConfig cfg;
  cfg.mechanism = Mechanism::MCAR;
  cfg.reps = 3;
  cfg.pms = {0.3};
  cfg.score_models = {ScoreModel::Linear};
  cfg.gam.rounds = 40;
  cfg.gam.max_bins = 16;
  cfg.n_threads = 2;
  auto cells = run_missingness_benchmark(base, cfg);
  REQUIRE(cells.size() == 1);
  const double majority = 0.7;
  for (double acc : {cells[0].ebm.mean, cells[0].lr.mean, cells[0].rf.mean, cells[0].knn.mean}) {
    CHECK(acc > majority - 0.15);
    CHECK(acc < majority + 0.15);
  }
}
