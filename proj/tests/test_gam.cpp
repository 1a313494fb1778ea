#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "missinglens/csv.hpp"
#include "missinglens/gam.hpp"
#include "missinglens/missingness.hpp"
#include "missinglens/rng.hpp"
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

// two-feature logistic model built by hand: bins [0,1], (1,2] per feature
GamModel hand_model() {
  GamModel m;
  m.link = Link::Logistic;
  m.intercept = 1.0;
  m.target = "y";
  ShapeFunction a;
  a.feature = "a";
  a.layout.edges = Eigen::VectorXd(3);
  a.layout.edges << 0, 1, 2;
  a.layout.counts = Eigen::VectorXd(2);
  a.layout.counts << 5, 5;
  a.scores = Eigen::VectorXd(2);
  a.scores << 0.5, -0.5;
  ShapeFunction b = a;
  b.feature = "b";
  b.scores << -0.2, 0.2;
  m.shapes = {a, b};
  return m;
}

Table two_feature_table(double va, double vb) {
  Table t;
  t.n_rows = 1;
  Eigen::VectorXd x(1);
  x << va;
  t.columns.push_back(continuous_column("a", x));
  x << vb;
  t.columns.push_back(continuous_column("b", x));
  return t;
}

}  // namespace

TEST_CASE("quantile binning of 1..100 into 4 bins") {
  Eigen::VectorXd v(100);
  for (int i = 0; i < 100; ++i) v[i] = i + 1;
  BinLayout layout = build_bins(continuous_column("v", v), 4);
  REQUIRE(layout.edges.size() == 5);
  CHECK(layout.edges[0] == doctest::Approx(1.0));
  CHECK(layout.edges[1] == doctest::Approx(25.75));
  CHECK(layout.edges[2] == doctest::Approx(50.5));
  CHECK(layout.edges[3] == doctest::Approx(75.25));
  CHECK(layout.edges[4] == doctest::Approx(100.0));
  REQUIRE(layout.counts.size() == 4);
  for (int k = 0; k < 4; ++k) CHECK(layout.counts[k] == 25.0);
  CHECK_FALSE(layout.missing_bin.has_value());
}

TEST_CASE("constant column collapses to a single bin") {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(17, 4.0);
  BinLayout layout = build_bins(continuous_column("v", v), 8);
  CHECK(layout.n_value_bins() == 1);
  CHECK(layout.counts[0] == 17.0);
  CHECK(layout.bin_of(4.0, false) == 0);
}

TEST_CASE("sentinel-encoded cells get the dedicated missing bin") {
  Eigen::VectorXd v(6);
  v << 0.5, -5, 3, -5, 7, 1;
  Column col = continuous_column("v", v);
  col.sentinel = -5.0;
  BinLayout layout = build_bins(col, 4);
  REQUIRE(layout.missing_bin.has_value());
  CHECK(layout.counts[*layout.missing_bin] == 2.0);
  CHECK(layout.edges[0] == doctest::Approx(0.5));  // value bins cover observed range only
  CHECK(layout.edges[layout.edges.size() - 1] == doctest::Approx(7.0));
  CHECK(layout.bin_of(-5.0, false) == *layout.missing_bin);
  CHECK(layout.counts.sum() == 6.0);
}

TEST_CASE("binning an all-missing column fails") {
  Column col = continuous_column("v", Eigen::VectorXd(3));
  col.values << 1, 2, 3;
  col.missing = {1, 1, 1};
  CHECK_THROWS_AS(build_bins(col, 4), ValueError);
}

TEST_CASE("regression fit recovers an affine signal") {
  const Index n = 2000;
  Rng rng(21);
  Eigen::VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = 2.0 * x[i] + 1.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x", x));
  t.columns.push_back(continuous_column("y", y));

  GamConfig cfg;
  cfg.seed = 1;
  cfg.max_bins = 64;
  cfg.rounds = 400;
  cfg.bags = 4;
  cfg.n_threads = 2;
  GamModel model = fit_gam(t, "y", cfg);
  CHECK(model.link == Link::Identity);
  CHECK(model.intercept == doctest::Approx(2.0).epsilon(0.025));

  const ShapeFunction& shape = model.shape("x");
  for (int b = 1; b + 1 < shape.layout.n_value_bins(); ++b) {
    const double mid = 0.5 * (shape.layout.lo(b) + shape.layout.hi(b));
    CHECK(std::abs(shape.scores[b] - 2.0 * (mid - 0.5)) < 0.1);
  }
}

TEST_CASE("constant target trains to zero shapes") {
  const Index n = 100;
  Eigen::VectorXd x(n), y = Eigen::VectorXd::Constant(n, 3.5);
  for (Index i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x", x));
  t.columns.push_back(continuous_column("y", y));
  GamConfig cfg;
  cfg.rounds = 50;
  cfg.bags = 2;
  GamModel model = fit_gam(t, "y", cfg);
  CHECK(model.intercept == doctest::Approx(3.5).epsilon(1e-9));
  for (Eigen::Index b = 0; b < model.shapes[0].scores.size(); ++b)
    CHECK(std::abs(model.shapes[0].scores[b]) < 1e-6);
}

TEST_CASE("classification ranks the signal feature far above noise") {
  const Index n = 3000;
  Rng rng(31);
  Eigen::VectorXd x1(n), x2(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = rng.normal();
    y[i] = x1[i] > 0 ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x1", x1));
  t.columns.push_back(continuous_column("x2", x2));
  t.columns.push_back(binary_column("y", y));

  Table train = t, test = t;
  train.n_rows = 2400;
  test.n_rows = 600;
  for (auto& c : train.columns) {
    c.values = c.values.head(2400).eval();
    c.missing.resize(2400);
  }
  for (auto& c : test.columns) {
    c.values = c.values.tail(600).eval();
    c.missing.resize(600);
  }

  GamConfig cfg;
  cfg.seed = 5;
  cfg.max_bins = 64;
  cfg.rounds = 200;
  cfg.bags = 2;
  cfg.learning_rate = 0.05;
  cfg.n_threads = 2;
  GamModel model = fit_gam(train, "y", cfg);

  auto importance = variable_importance(model);
  REQUIRE(importance.size() == 2);
  CHECK(importance[0].first == "x1");
  CHECK(importance[0].second >= 10.0 * importance[1].second);

  Eigen::VectorXd probs = predict_probabilities(model, test);
  Eigen::VectorXd labels = test.column("y").values;
  CHECK(auc(probs, labels) >= 0.95);
}

TEST_CASE("hand-built model predicts additively") {
  GamModel m = hand_model();
  // a=0.5 -> bin 0 (+0.5), b=1.5 -> bin 1 (+0.2): 1 + 0.5 - 0.2 = 1.3
  Table t = two_feature_table(0.5, 1.5);
  Prediction pred = predict(m, t, 0);
  CHECK(pred.score == doctest::Approx(1.3).epsilon(1e-15));

  // all-zero contributions -> intercept
  GamModel zero = m;
  zero.shapes[0].scores.setZero();
  zero.shapes[1].scores.setZero();
  CHECK(predict(zero, t, 0).score == 1.0);

  // logistic score 0 -> probability one half
  GamModel at0 = zero;
  at0.intercept = 0.0;
  REQUIRE(at0.link == Link::Logistic);
  CHECK(*predict(at0, t, 0).probability == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("out-of-range values clamp into edge bins") {
  GamModel m = hand_model();
  Table below = two_feature_table(-100.0, 1.5);
  Table above = two_feature_table(100.0, 1.5);
  CHECK(predict(m, below, 0).score == doctest::Approx(1.0 + 0.5 - 0.2));
  CHECK(predict(m, above, 0).score == doctest::Approx(1.0 - 0.5 - 0.2));
}

TEST_CASE("indicator form reproduces the shape exactly") {
  const Index n = 500;
  Rng rng(77);
  Eigen::VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = rng.uniform(0, 10);
    y[i] = std::sin(x[i]) + 0.05 * rng.normal();
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x", x));
  t.columns.push_back(continuous_column("y", y));
  GamConfig cfg;
  cfg.rounds = 120;
  cfg.bags = 2;
  cfg.max_bins = 32;
  cfg.seed = 2;
  GamModel model = fit_gam(t, "y", cfg);

  auto terms = to_indicator_form(model, "x");
  const ShapeFunction& shape = model.shape("x");
  REQUIRE(static_cast<int>(terms.size()) == shape.layout.n_bins());

  // evaluating the indicator expansion at every training row matches the
  // shape's own bin lookup bit for bit
  for (Index i = 0; i < n; ++i) {
    const int bin = shape.layout.bin_of(x[i], false);
    double via_terms = 0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (static_cast<int>(k) == bin) via_terms += terms[k].score;
    }
    CHECK(via_terms == shape.scores[bin]);
  }

  // three-bin toy: coefficients pass through unchanged
  GamModel toy = hand_model();
  auto toy_terms = to_indicator_form(toy, "a");
  CHECK(toy_terms[0].score == 0.5);
  CHECK(toy_terms[1].score == -0.5);
}

TEST_CASE("indicator form exposes the missing bin separately") {
  Eigen::VectorXd v(6);
  v << 0.5, -5, 3, -5, 7, 1;
  Column col = continuous_column("v", v);
  col.sentinel = -5.0;
  ShapeFunction shape;
  shape.feature = "v";
  shape.layout = build_bins(col, 4);
  shape.scores = Eigen::VectorXd::Zero(shape.layout.n_bins());
  shape.scores[*shape.layout.missing_bin] = 0.9;
  GamModel m;
  m.link = Link::Logistic;
  m.shapes = {shape};
  auto terms = to_indicator_form(m, "v");
  int n_missing_terms = 0;
  for (const auto& term : terms) {
    if (term.is_missing) {
      ++n_missing_terms;
      CHECK(term.score == 0.9);
      CHECK(term.count == 2.0);
      CHECK(term.lo == -5.0);
    }
  }
  CHECK(n_missing_terms == 1);
}

TEST_CASE("variable importance formula") {
  GamModel m = hand_model();
  auto imp = variable_importance(m);
  // |0.5| and |-0.5| on two equal-mass bins
  CHECK(imp[0].second == doctest::Approx(0.5));
  CHECK(imp[0].first == "a");  // ties keep feature order? a=0.5, b=0.2
  CHECK(imp[1].second == doctest::Approx(0.2));

  GamModel zero = m;
  zero.shapes[0].scores.setZero();
  zero.shapes[1].scores.setZero();
  auto zimp = variable_importance(zero);
  CHECK(zimp[0].second == 0.0);
  CHECK(zimp[0].first == "a");  // ties by feature order
}

TEST_CASE("save/load round trip keeps predictions bit-identical") {
  const Index n = 400;
  Rng rng(8);
  Eigen::VectorXd x1(n), x2(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = rng.uniform(0, 4);
    y[i] = (x1[i] + 0.3 * x2[i] > 0.5) ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x1", x1));
  t.columns.push_back(continuous_column("x2", x2));
  t.columns.push_back(binary_column("y", y));
  GamConfig cfg;
  cfg.rounds = 80;
  cfg.bags = 2;
  cfg.max_bins = 16;
  cfg.seed = 4;
  GamModel model = fit_gam(t, "y", cfg);

  const auto path = std::filesystem::temp_directory_path() / "ml_model_roundtrip.json";
  save_model(model, path);
  GamModel loaded = load_model(path);

  Eigen::VectorXd a = predict_scores(model, t);
  Eigen::VectorXd b = predict_scores(loaded, t);
  for (Index i = 0; i < n; ++i) CHECK(a[i] == b[i]);
  std::filesystem::remove(path);
}

TEST_CASE("unknown model schema version is rejected") {
  nlohmann::json j = model_to_json(hand_model());
  j["version"] = 99;
  CHECK_THROWS_AS(model_from_json(j), ParseError);
  nlohmann::json not_model = {{"foo", 1}};
  CHECK_THROWS_AS(model_from_json(not_model), ParseError);
}

TEST_CASE("centering and additivity invariants hold after training") {
  const Index n = 1200;
  Rng rng(13);
  Eigen::VectorXd x1(n), x2(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x1[i] = rng.uniform(0, 1);
    x2[i] = rng.normal();
    y[i] = std::sin(6 * x1[i]) + 0.5 * x2[i] + 0.1 * rng.normal();
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x1", x1));
  t.columns.push_back(continuous_column("x2", x2));
  t.columns.push_back(continuous_column("y", y));
  GamConfig cfg;
  cfg.rounds = 150;
  cfg.bags = 3;
  cfg.seed = 6;
  cfg.max_bins = 48;
  cfg.n_threads = 2;
  GamModel model = fit_gam(t, "y", cfg);

  for (const auto& shape : model.shapes) {
    const double mass = shape.layout.counts.dot(shape.scores);
    CHECK(std::abs(mass) <= 1e-8 * static_cast<double>(n));
  }

  Eigen::VectorXd scores = predict_scores(model, t);
  for (Index i = 0; i < 50; ++i) {
    double manual = model.intercept;
    for (const auto& shape : model.shapes) {
      const Column& col = t.column(shape.feature);
      manual += shape.scores[shape.layout.bin_of(col.values[i], false)];
    }
    CHECK(scores[i] == manual);
  }
}

TEST_CASE("training loss is non-increasing per cycle") {
  const Index n = 600;
  Rng rng(17);
  Eigen::VectorXd x1(n), x2(n), yr(n), yb(n);
  for (Index i = 0; i < n; ++i) {
    x1[i] = rng.uniform(0, 1);
    x2[i] = rng.normal();
    yr[i] = x1[i] * 2 - x2[i] + 0.2 * rng.normal();
    yb[i] = (x1[i] + 0.2 * rng.normal() > 0.5) ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x1", x1));
  t.columns.push_back(continuous_column("x2", x2));
  t.columns.push_back(continuous_column("yr", yr));
  t.columns.push_back(binary_column("yb", yb));

  GamConfig cfg;
  cfg.rounds = 60;
  cfg.bags = 1;
  cfg.bootstrap = false;
  cfg.holdout_fraction = 0;
  cfg.learning_rate = 0.1;
  cfg.max_bins = 32;

  for (const char* target : {"yr", "yb"}) {
    Table sub = t;
    // drop the other target column
    std::string other = std::string(target) == "yr" ? "yb" : "yr";
    sub.columns.erase(sub.columns.begin() + sub.column_index(other));
    TrainTrace trace;
    fit_gam(sub, target, cfg, &trace);
    REQUIRE(trace.train_loss.size() == 60);
    for (std::size_t c = 1; c < trace.train_loss.size(); ++c)
      CHECK(trace.train_loss[c] <= trace.train_loss[c - 1] + 1e-6);
  }
}

TEST_CASE("same seed gives byte-identical models") {
  const Index n = 500;
  Rng rng(23);
  Eigen::VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] > 0.2 ? 1.0 : 0.0;
  }
  Table t;
  t.n_rows = n;
  t.columns.push_back(continuous_column("x", x));
  t.columns.push_back(binary_column("y", y));
  GamConfig cfg;
  cfg.rounds = 60;
  cfg.bags = 4;
  cfg.seed = 99;
  cfg.n_threads = 2;
  GamModel a = fit_gam(t, "y", cfg);
  cfg.n_threads = 1;  // schedule independence
  GamModel b = fit_gam(t, "y", cfg);
  CHECK(model_to_json(a).dump() == model_to_json(b).dump());
}

TEST_CASE("fit_gam validates its target") {
  Table t = load_csv_string("x,y\n1,0\n2,0\n3,0\n");
  CHECK_THROWS_AS(fit_gam(t, "y", {}), ValueError);  // single class
  Table bad = load_csv_string("x,y\n1,2\n2,nanx\n3,4\n");
  CHECK(bad.column("y").kind == ColumnKind::Categorical);
  CHECK_THROWS_AS(fit_gam(bad, "y", {}), ValueError);  // categorical target
}
