#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "missinglens/csv.hpp"
#include "missinglens/gam.hpp"
#include "missinglens/missingness.hpp"
#include "missinglens/rng.hpp"
#include "missinglens/stats.hpp"
#include "missinglens/synthgen.hpp"
#include "missinglens/table.hpp"

using namespace missinglens;

namespace {

Column continuous_column(std::string name, Eigen::VectorXd values) {
  Column col;
  col.name = std::move(name);
  col.kind = ColumnKind::Continuous;
  col.missing.assign(static_cast<std::size_t>(values.size()), 0);
  col.values = std::move(values);
  return col;
}

Column binary_column(std::string name, Eigen::VectorXd values) {
  Column col = continuous_column(std::move(name), std::move(values));
  col.kind = ColumnKind::Binary;
  return col;
}

// MNAR-style synthetic: the masked group carries much higher outcome risk
Table bilirubin_like(Index n, std::uint64_t seed, double* sentinel_out = nullptr) {
  Rng rng(seed);
  Eigen::VectorXd risk(n), bili(n), other(n), y(n);
  for (Index i = 0; i < n; ++i) {
    risk[i] = rng.normal();
    bili[i] = std::exp(0.6 * risk[i] + 0.3 * rng.normal());
    other[i] = 0.5 * risk[i] + 0.9 * rng.normal();
    y[i] = rng.uniform() < sigmoid(1.4 * risk[i] - 0.2) ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  Column bcol = continuous_column("bili", bili);
  for (Index i = 0; i < n; ++i) {
    if (rng.uniform() < sigmoid(1.8 * (risk[i] - 0.5))) {  // sickest rows unmeasured
      bcol.values[i] = std::numeric_limits<double>::quiet_NaN();
      bcol.missing[static_cast<std::size_t>(i)] = 1;
    }
  }
  t.columns.push_back(bcol);
  t.columns.push_back(continuous_column("other", other));
  t.columns.push_back(binary_column("y", y));
  t.target_index = 2;
  Table enc = encode_missing(t, "bili", MissingEncoding::sentinel_below_min());
  if (sentinel_out) *sentinel_out = *enc.column("bili").sentinel;
  return enc;
}

GamConfig quick_gam() {
  GamConfig cfg;
  cfg.max_bins = 32;
  cfg.rounds = 150;
  cfg.learning_rate = 0.05;
  cfg.bags = 2;
  cfg.patience = 25;
  cfg.n_threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("wald arithmetic: z and the two-sided p-value") {
  // theta=0.392, se=0.2 -> z=1.96, p ~= 0.05
  const double z = 0.392 / 0.2;
  CHECK(z == doctest::Approx(1.96));
  CHECK(normal_two_sided_p(z) == doctest::Approx(0.04999579029644097).epsilon(1e-9));
}

TEST_CASE("wald on a zero missing-bin coefficient accepts with p=1") {
  const Index n = 120;
  Rng rng(3);
  Eigen::VectorXd v(n), y(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = i % 5 == 0 ? -5.0 : rng.uniform(0, 10);
    y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  Column col = continuous_column("v", v);
  col.sentinel = -5.0;
  t.columns.push_back(col);
  t.columns.push_back(binary_column("y", y));

  GamModel m;
  m.link = Link::Logistic;
  m.intercept = 0.0;
  m.target = "y";
  ShapeFunction shape;
  shape.feature = "v";
  shape.layout = build_bins(col, 8);
  shape.scores = Eigen::VectorXd::Zero(shape.layout.n_bins());
  m.shapes = {shape};

  WaldReport report = wald_mcar_test(m, t, "v", 0.05);
  CHECK(report.theta_hat == 0.0);
  CHECK(report.z == 0.0);
  CHECK(report.p_value == 1.0);
  CHECK_FALSE(report.reject_mcar);
  CHECK(report.z == report.theta_hat / report.se);
}

TEST_CASE("wald rejects MCAR on a bilirubin-style mechanism") {
  Table t = bilirubin_like(3000, 11);
  GamConfig cfg = quick_gam();
  cfg.seed = 7;
  cfg.link = Link::Logistic;
  GamModel model = fit_gam(t, "y", cfg);
  WaldReport report = wald_mcar_test(model, t, "bili", 0.05);
  CHECK(report.converged);
  CHECK(report.p_value < 0.05);
  CHECK(report.reject_mcar);
  // internal consistency
  CHECK(report.z == doctest::Approx(report.theta_hat / report.se));
  CHECK(report.p_value == doctest::Approx(normal_two_sided_p(report.z)));
}

TEST_CASE("wald without a missing bin reports nothing to test") {
  const Index n = 200;
  Rng rng(5);
  Eigen::VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x", x));
  t.columns.push_back(binary_column("y", y));
  GamConfig cfg = quick_gam();
  cfg.rounds = 30;
  GamModel model = fit_gam(t, "y", cfg);
  CHECK_THROWS_AS(wald_mcar_test(model, t, "x", 0.05), NothingToTest);
  CHECK_THROWS_AS(wald_mcar_test(model, t, "x", 1.5), ValueError);
}

TEST_CASE("wald p-value is symmetric under global sign flips") {
  Table t = bilirubin_like(1500, 19);
  GamConfig cfg = quick_gam();
  cfg.rounds = 80;
  cfg.seed = 3;
  cfg.link = Link::Logistic;
  GamModel model = fit_gam(t, "y", cfg);
  GamModel negated = model;
  negated.intercept = -negated.intercept;
  for (auto& s : negated.shapes) s.scores = -s.scores;

  WaldReport a = wald_mcar_test(model, t, "bili", 0.05);
  WaldReport b = wald_mcar_test(negated, t, "bili", 0.05);
  CHECK(b.theta_hat == -a.theta_hat);
  CHECK(b.p_value == doctest::Approx(a.p_value).epsilon(1e-6));
}

TEST_CASE("p-value strictly decreases as |theta| grows at fixed se") {
  double prev = 1.1;
  for (double theta : {0.0, 0.1, 0.3, 0.8, 1.5, 3.0}) {
    const double p = normal_two_sided_p(theta / 0.2);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("littles test on complete data has nothing to test") {
  Table t = load_csv_string("a,b\n1,2\n2,3\n4,5\n6,7\n");
  LittleReport report = littles_test(t);
  CHECK(report.nothing_to_test);
  CHECK(report.df == 0);
  CHECK(report.p_value == 1.0);
  CHECK(report.n_patterns == 1);
}

TEST_CASE("littles test on a small mixed-pattern table") {
  Table t = load_csv_string(
      "a,b\n1,2\n2,\n3,4\n4,5\n,3\n5,6\n6,\n7,8\n8,9\n2,3\n");
  LittleReport report = littles_test(t);
  CHECK(report.n_patterns == 3);
  CHECK(report.df == 2);  // (2 + 1 + 1) - 2
  CHECK(report.chi2 >= 0.0);
  CHECK(report.p_value > 0.0);
  CHECK(report.p_value <= 1.0);
  CHECK(report.em_converged);
}

TEST_CASE("littles test needs two continuous columns") {
  Table t = load_csv_string("a,y\n1,0\n2,1\n,0\n");
  CHECK(t.column("y").kind == ColumnKind::Binary);
  CHECK_THROWS_AS(littles_test(t), ValueError);
}

TEST_CASE("littles test calibration and power on small replicates") {
  SurrogateConfig scfg;
  scfg.n = 400;
  scfg.p = 4;
  scfg.seed = 2;
  Table base = make_surrogate(scfg);

  int mcar_rejects = 0, mar_rejects = 0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    SynthSpec spec;
    spec.p_m = 0.15;
    spec.target_feature = "age";
    spec.seed = 1000 + static_cast<std::uint64_t>(r);
    spec.mechanism = Mechanism::MCAR;
    mcar_rejects += littles_test(gen_missing(base, spec).table).p_value < 0.05;
    spec.mechanism = Mechanism::MAR;
    mar_rejects += littles_test(gen_missing(base, spec).table).p_value < 0.05;
  }
  CHECK(mcar_rejects <= 7);       // nominal 5% of 40
  CHECK(mar_rejects >= reps - 3);  // near-certain rejection under MAR
}

TEST_CASE("auc handles ties, separation and random scores") {
  Eigen::VectorXd s3(3), l3(3);
  s3 << 1, 2, 3;
  l3 << 0, 1, 0;
  CHECK(auc(s3, l3) == doctest::Approx(0.5));

  Eigen::VectorXd sep(4), lsep(4);
  sep << 0.1, 0.2, 0.8, 0.9;
  lsep << 0, 0, 1, 1;
  CHECK(auc(sep, lsep) == doctest::Approx(1.0));

  Eigen::VectorXd ties(2), lt(2);
  ties << 1, 1;
  lt << 0, 1;
  CHECK(auc(ties, lt) == doctest::Approx(0.5));

  Rng rng(4);
  const Index n = 10000;
  Eigen::VectorXd s(n), l(n);
  for (Index i = 0; i < n; ++i) {
    s[i] = rng.normal();
    l[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  CHECK(std::abs(auc(s, l) - 0.5) < 0.02);

  Eigen::VectorXd one(2), lone(2);
  one << 1, 2;
  lone << 1, 1;
  CHECK_THROWS_AS(auc(one, lone), ValueError);
}

TEST_CASE("missingness of an MCAR feature is unpredictable") {
  SurrogateConfig scfg;
  scfg.n = 3000;
  scfg.p = 6;
  scfg.seed = 9;
  Table base = make_surrogate(scfg);
  SynthSpec spec;
  spec.mechanism = Mechanism::MCAR;
  spec.p_m = 0.2;
  spec.target_feature = "age";
  spec.seed = 77;
  GenResult gen = gen_missing(base, spec);

  MissingnessConfig mc;
  mc.gam = quick_gam();
  mc.gam.rounds = 100;
  mc.seed = 5;
  MissingnessReport report = fit_missingness_model(gen.table, "age", true, mc);
  CHECK(std::abs(report.auc_value - 0.5) <= 0.05);
}

TEST_CASE("chained missingness is detected with a separated shape") {
  const Index n = 2500;
  Rng rng(23);
  Eigen::VectorXd a(n), b(n), y(n);
  std::vector<std::uint8_t> amiss(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    a[i] = rng.normal() * 2 + 10;
    b[i] = rng.normal();
    y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    amiss[static_cast<std::size_t>(i)] = rng.uniform() < 0.3 ? 1 : 0;
  }
  Table t;
  t.n_rows = n;
  Column ca = continuous_column("a", a);
  Column cb = continuous_column("b", b);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index i = 0; i < n; ++i) {
    if (amiss[static_cast<std::size_t>(i)]) {
      ca.values[i] = nan;
      ca.missing[static_cast<std::size_t>(i)] = 1;
      cb.values[i] = nan;  // b is missing exactly when a is missing
      cb.missing[static_cast<std::size_t>(i)] = 1;
    }
  }
  t.columns.push_back(ca);
  t.columns.push_back(cb);
  t.columns.push_back(binary_column("y", y));
  t.target_index = 2;

  MissingnessConfig mc;
  mc.gam = quick_gam();
  mc.gam.rounds = 150;
  mc.gam.learning_rate = 0.1;
  mc.seed = 1;
  MissingnessReport report = fit_missingness_model(t, "b", true, mc);
  CHECK(report.auc_value >= 0.95);
  CHECK(report.top_predictors[0].first == "a");

  REQUIRE(report.separated_shapes.count("a") == 1);
  const SeparatedShapeCurves& curves = report.separated_shapes.at("a");
  REQUIRE_FALSE(curves.imputed.empty());
  REQUIRE_FALSE(curves.observed.empty());
  double obs_max = -1e300, obs_min = 1e300, imp_min = 1e300;
  for (const auto& seg : curves.observed) {
    obs_max = std::max(obs_max, seg.score);
    obs_min = std::min(obs_min, seg.score);
  }
  for (const auto& seg : curves.imputed) imp_min = std::min(imp_min, seg.score);
  CHECK(imp_min > obs_max + 0.5);       // imputed group sits clearly above
  CHECK(obs_max - obs_min < imp_min - obs_max);  // observed branch near-constant
}

TEST_CASE("separated_shape without missing cells is the plain shape") {
  const Index n = 800;
  Rng rng(15);
  Eigen::VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = rng.uniform(0, 10);
    y[i] = rng.uniform() < sigmoid(x[i] - 5) ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x", x));
  t.columns.push_back(binary_column("y", y));
  GamConfig cfg = quick_gam();
  cfg.rounds = 60;
  SeparatedShapeCurves curves = separated_shape(t, "x", Eigen::VectorXd(0), "y", cfg);
  CHECK(curves.imputed.empty());
  CHECK_FALSE(curves.observed.empty());
}

TEST_CASE("separated_shape splits groups and restores coordinates exactly") {
  const Index n = 4000;
  Rng rng(29);
  Eigen::VectorXd x(n), y(n);
  std::vector<std::uint8_t> miss(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    x[i] = rng.uniform(0, 10);
    miss[static_cast<std::size_t>(i)] = rng.uniform() < 0.3 ? 1 : 0;
    const double rate = miss[static_cast<std::size_t>(i)] ? 0.8 : 0.3;
    y[i] = rng.uniform() < rate ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  Column cx = continuous_column("x", x);
  Index n_miss = 0;
  for (Index i = 0; i < n; ++i) {
    if (miss[static_cast<std::size_t>(i)]) {
      cx.missing[static_cast<std::size_t>(i)] = 1;
      cx.values[i] = std::numeric_limits<double>::quiet_NaN();
      ++n_miss;
    }
  }
  t.columns.push_back(cx);
  t.columns.push_back(binary_column("y", y));

  Eigen::VectorXd imputed(n_miss);
  Rng rng2(31);
  for (Index k = 0; k < n_miss; ++k) imputed[k] = rng2.uniform(0.5, 9.5);

  GamConfig cfg = quick_gam();
  cfg.max_bins = 8;
  cfg.rounds = 200;
  cfg.learning_rate = 0.1;
  SeparatedShapeCurves curves = separated_shape(t, "x", imputed, "y", cfg);
  REQUIRE_FALSE(curves.observed.empty());
  REQUIRE_FALSE(curves.imputed.empty());

  // higher-outcome missing group: imputed curve uniformly above observed
  double obs_max = -1e300, imp_min = 1e300;
  for (const auto& seg : curves.observed) obs_max = std::max(obs_max, seg.score);
  for (const auto& seg : curves.imputed) imp_min = std::min(imp_min, seg.score);
  CHECK(imp_min > obs_max);

  // imputed-group coordinates restore bit-exactly
  CHECK(curves.imputed.front().lo == imputed.minCoeff());
  CHECK(curves.imputed.back().hi == imputed.maxCoeff());

  // the offset clears the observed range
  Eigen::VectorXd obs = t.column("x").observed_values();
  CHECK(curves.offset == obs.maxCoeff() + 1.0 + (obs.maxCoeff() - obs.minCoeff()));

  // observed-group bins identical to the unseparated encoding
  BinLayout plain = build_bins(t.column("x"), cfg.max_bins);
  REQUIRE(static_cast<int>(curves.observed.size()) ==
          static_cast<int>(plain.edges.size()) - 1);
  for (std::size_t b = 0; b < curves.observed.size(); ++b) {
    CHECK(curves.observed[b].lo == plain.edges[static_cast<Eigen::Index>(b)]);
    CHECK(curves.observed[b].hi == plain.edges[static_cast<Eigen::Index>(b) + 1]);
    CHECK(curves.observed[b].count == plain.counts[static_cast<Eigen::Index>(b)]);
  }
}
