#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "missinglens/gam.hpp"
#include "missinglens/table.hpp"

namespace missinglens {

enum class Mechanism { MCAR, MAR, MNAR };
enum class ScoreModel { Linear, Curvilinear, Quadratic };
enum class MaskTail { Lowest, Highest };

std::string to_string(Mechanism m);
std::string to_string(ScoreModel m);
Mechanism mechanism_from_string(std::string_view s);
ScoreModel score_model_from_string(std::string_view s);

// Semi-synthetic missingness recipe. MCAR masks with independent Bernoulli(p_m)
// draws; MAR/MNAR build a per-row score from standard-normal coefficients over
// the standardized features (excluding or including the target feature) plus
// Gaussian noise, then mask exactly ceil(n * p_m) rows at the chosen extreme.
struct SynthSpec {
  Mechanism mechanism = Mechanism::MCAR;
  double p_m = 0.1;
  ScoreModel score_model = ScoreModel::Linear;
  std::string target_feature;
  double noise_sd = 1.0;
  MaskTail tail = MaskTail::Lowest;
  std::uint64_t seed = 0;
};

struct GenResult {
  Table table;                      // base table with the mask applied
  std::vector<std::uint8_t> mask;   // ground truth, one flag per row
};

GenResult gen_missing(const Table& table, const SynthSpec& spec);

// Complete surrogate base table: correlated features from a shared latent
// factor with heterogeneous marginal transforms, plus a Bernoulli outcome
// driven by the factor. Stands in for the non-redistributable clinical data.
struct SurrogateConfig {
  Index n = 5000;
  int p = 14;
  std::uint64_t seed = 1;
};

Table make_surrogate(const SurrogateConfig& config = {});

// Missing-assumed-normal hazard: the target feature is missing mostly for
// healthy rows (high true values), the predictors are weakly informative, and
// the outcome depends strongly on the underlying health state.
struct AssumedNormalSurrogate {
  Table table;  // complete, including the true values of the masked feature
  std::vector<std::uint8_t> mask;
  std::string feature;
};

AssumedNormalSurrogate make_assumed_normal_surrogate(Index n = 4000, std::uint64_t seed = 1);

struct McarBenchConfig {
  std::vector<double> pms = {0.1, 0.2, 0.3};
  int reps = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::string target_feature = "age";
  GamConfig gam;
  int n_threads = 0;

  McarBenchConfig() {
    gam.max_bins = 32;
    gam.learning_rate = 0.05;
    gam.rounds = 200;
    gam.bags = 2;
    gam.patience = 20;
    gam.n_threads = 1;  // parallelism lives at the replicate level
  }
};

struct McarBenchCell {
  Mechanism mechanism = Mechanism::MCAR;
  double p_m = 0;
  int reps = 0;
  double wald_rate = 0, wald_se = 0;
  double little_rate = 0, little_se = 0;
};

// Table-1-style harness: rejection rates of the Wald MCAR test and Little's
// test over seeded MCAR and MAR-linear replicates.
std::vector<McarBenchCell> run_mcar_benchmark(const Table& base, const McarBenchConfig& config);

struct PredBenchConfig {
  std::vector<double> pms = {0.1, 0.2, 0.3};
  std::vector<ScoreModel> score_models = {ScoreModel::Linear, ScoreModel::Curvilinear,
                                          ScoreModel::Quadratic};
  Mechanism mechanism = Mechanism::MAR;
  int reps = 20;
  std::uint64_t seed = 1;
  std::string target_feature = "age";
  double holdout_fraction = 0.2;
  int knn_k = 5;
  int rf_trees = 100;
  GamConfig gam;
  int n_threads = 0;

  PredBenchConfig() {
    gam.max_bins = 32;
    gam.learning_rate = 0.05;
    gam.rounds = 200;
    gam.bags = 2;
    gam.patience = 20;
    gam.n_threads = 1;
  }
};

struct PredBenchEntry {
  double mean = 0, sd = 0;
};

struct PredBenchCell {
  Mechanism mechanism = Mechanism::MAR;
  ScoreModel score_model = ScoreModel::Linear;
  double p_m = 0;
  int reps = 0;
  PredBenchEntry ebm, lr, rf, knn;
};

// Table-3-style harness: held-out accuracy of predicting the missingness
// indicator with a logistic GAM vs logistic regression, random forest and KNN.
std::vector<PredBenchCell> run_missingness_benchmark(const Table& base,
                                                     const PredBenchConfig& config);

}  // namespace missinglens
