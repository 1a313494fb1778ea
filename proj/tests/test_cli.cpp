#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "missinglens/csv.hpp"
#include "missinglens/gam.hpp"
#include "missinglens/missingness.hpp"
#include "missinglens/rng.hpp"
#include "missinglens/synthgen.hpp"

using namespace missinglens;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return MISSINGLENS_CLI_PATH; }

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = fs::temp_directory_path() / ("ml_cli_out_" + std::to_string(counter++));
  const std::string cmd = std::string(cli_path()) + " " + args + " > " + out.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(raw);
  std::ifstream in(out);
  std::ostringstream buf;
  buf << in.rdbuf();
  r.stdout_text = buf.str();
  fs::remove(out);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ml_cli_dir_" + std::to_string(Rng(std::random_device{}()).next_u64() % 100000000));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli train produces a loadable model, shapes and svg") {
  TempDir dir;
  const fs::path csv = dir.path / "base.csv";
  const fs::path model = dir.path / "model.json";
  const fs::path shapes = dir.path / "shapes";

  REQUIRE(run_cli("surrogate-gen --n 800 --features 5 --seed 3 --out " + csv.string())
              .exit_code == 0);
  RunResult train = run_cli("train --csv " + csv.string() + " --target outcome --out-model " +
                            model.string() + " --out-dir " + shapes.string() +
                            " --rounds 60 --bags 2 --max-bins 16 --seed 4");
  REQUIRE(train.exit_code == 0);

  GamModel m = load_model(model);
  CHECK(m.link == Link::Logistic);
  CHECK(m.shapes.size() == 5);
  CHECK(fs::exists(shapes / "age.svg"));
  CHECK(fs::exists(shapes / "age.shape.json"));
  CHECK(fs::exists(model.string() + ".run.json"));

  // density strip mass equals the row count
  Table t = load_csv(csv);
  for (const auto& shape : m.shapes) CHECK(shape.layout.counts.sum() == t.n_rows);

  // shape JSON re-evaluated row-wise matches model predictions
  auto sj = nlohmann::json::parse(slurp(shapes / "age.shape.json"));
  const auto& shape = m.shape("age");
  Eigen::VectorXd scores = predict_scores(m, t);
  Eigen::VectorXd manual = Eigen::VectorXd::Constant(t.n_rows, m.intercept);
  for (const auto& other : m.shapes) {
    const Column& col = t.column(other.feature);
    for (Index i = 0; i < t.n_rows; ++i)
      manual[i] += other.scores[other.layout.bin_of(col.values[i], false)];
  }
  for (Index i = 0; i < t.n_rows; ++i) CHECK(scores[i] == manual[i]);
  CHECK(sj["entries"].size() == static_cast<std::size_t>(shape.layout.n_bins()));

  // SVG sanity
  const std::string svg = slurp(shapes / "age.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("path") != std::string::npos);
}

TEST_CASE("cli diagnose covers little, wald and prediction paths") {
  TempDir dir;
  const fs::path csv = dir.path / "base.csv";
  REQUIRE(run_cli("surrogate-gen --n 700 --features 5 --seed 5 --out " + csv.string())
              .exit_code == 0);

  // little on complete data: p = 1 report, exit 0
  const fs::path little = dir.path / "little.json";
  RunResult lr = run_cli("diagnose --csv " + csv.string() + " --little --out " + little.string());
  CHECK(lr.exit_code == 0);
  auto lj = nlohmann::json::parse(slurp(little));
  CHECK(lj["little"]["p_value"] == 1.0);
  CHECK(lj["little"]["nothing_to_test"] == true);

  // wald on a feature without a missing bin: distinct exit code
  const fs::path model = dir.path / "model.json";
  REQUIRE(run_cli("train --csv " + csv.string() + " --target outcome --out-model " +
                  model.string() + " --rounds 40 --bags 2 --max-bins 16 --seed 1")
              .exit_code == 0);
  RunResult wald =
      run_cli("diagnose --model " + model.string() + " --csv " + csv.string() + " --mcar age");
  CHECK(wald.exit_code == 5);

  // no mode chosen: usage error
  CHECK(run_cli("diagnose --csv " + csv.string()).exit_code == 2);
}

TEST_CASE("cli impute and audit wire together with exit codes") {
  TempDir dir;
  const fs::path csv = dir.path / "masked.csv";

  // build an assumed-normal surrogate (pf_ratio has systematic missingness)
  REQUIRE(run_cli("surrogate-gen --kind assumed-normal --n 3000 --seed 2 --out " + csv.string())
              .exit_code == 0);

  const fs::path imputed = dir.path / "imputed.csv";
  RunResult imp = run_cli("impute --csv " + csv.string() + " --method mean --out " +
                          imputed.string() + " --seed 7");
  REQUIRE(imp.exit_code == 0);
  CHECK(fs::exists(imputed.string() + ".provenance.json"));

  Table before = load_csv(csv);
  Table after = load_csv(imputed);
  CHECK(after.column("pf_ratio").n_missing() == 0);
  CHECK(column_stats(before, "pf_ratio").mean ==
        doctest::Approx(column_stats(after, "pf_ratio").mean).epsilon(1e-9));

  const fs::path model = dir.path / "model.json";
  REQUIRE(run_cli("train --csv " + imputed.string() + " --target outcome --out-model " +
                  model.string() + " --rounds 150 --bags 2 --max-bins 48 --learning-rate 0.1" +
                  " --seed 5")
              .exit_code == 0);

  const fs::path report = dir.path / "audit.json";
  const fs::path svgs = dir.path / "audit_svgs";
  RunResult audit = run_cli("audit --model " + model.string() + " --csv " + imputed.string() +
                            " --statistic mean --out " + report.string() + " --svg-dir " +
                            svgs.string() + " --seed 3");
  auto aj = nlohmann::json::parse(slurp(report));
  // the bad mean imputation should be flagged, turning the exit code to 4
  CHECK(aj["any_harmful"] == true);
  CHECK(audit.exit_code == 4);
  CHECK(fs::exists(svgs / "pf_ratio.audit.svg"));
}

TEST_CASE("cli edit applies scripts and emits diffs") {
  TempDir dir;
  const fs::path csv = dir.path / "base.csv";
  const fs::path model = dir.path / "model.json";
  REQUIRE(run_cli("surrogate-gen --n 600 --features 4 --seed 9 --out " + csv.string())
              .exit_code == 0);
  REQUIRE(run_cli("train --csv " + csv.string() + " --target outcome --out-model " +
                  model.string() + " --rounds 40 --bags 2 --max-bins 8 --seed 2")
              .exit_code == 0);

  GamModel m = load_model(model);
  const auto& layout = m.shape("age").layout;
  const double lo = layout.edges[1];
  const double hi = layout.edges[layout.edges.size() - 2];
  REQUIRE(lo < hi);

  const fs::path script = dir.path / "edit.json";
  nlohmann::json sj;
  sj["recenter"] = false;
  sj["edits"] = {{{"feature", "age"}, {"region", {lo, hi}}, {"action", "flatten_to"}, {"value", 0.0}}};
  std::ofstream(script) << sj.dump();

  const fs::path edited = dir.path / "edited.json";
  const fs::path diff = dir.path / "diff.json";
  RunResult er = run_cli("edit --model " + model.string() + " --script " + script.string() +
                         " --out " + edited.string() + " --emit-diff " + diff.string());
  REQUIRE(er.exit_code == 0);

  auto dj = nlohmann::json::parse(slurp(diff));
  for (const auto& bin : dj["bins"]) {
    if (bin["missing_bin"] == true) continue;
    CHECK(bin["lo"].get<double>() >= lo - 1e-9);
    CHECK(bin["hi"].get<double>() <= hi + 1e-9);
  }
  GamModel em = load_model(edited);
  CHECK(em.edit_history.size() == 1);
}

TEST_CASE("cli simulate validates reps and runs reduced grids") {
  TempDir dir;
  CHECK(run_cli("simulate --table1 --reps 0").exit_code == 2);

  const fs::path out = dir.path / "table1.json";
  RunResult sim = run_cli("simulate --table1 --reps 2 --pm 0.2 --n 300 --features 4 --seed 3 --out " +
                          out.string() + " --threads 2");
  REQUIRE(sim.exit_code == 0);
  auto j = nlohmann::json::parse(slurp(out));
  REQUIRE(j["table1"].size() == 2);
  CHECK(sim.stdout_text.find("wald_rate") != std::string::npos);

  const fs::path out3 = dir.path / "table3.json";
  RunResult sim3 = run_cli(
      "simulate --table3 --reps 2 --pm 0.2 --n 300 --features 4 --seed 3 --score-model linear --out " +
      out3.string() + " --threads 2");
  REQUIRE(sim3.exit_code == 0);
  auto j3 = nlohmann::json::parse(slurp(out3));
  REQUIRE(j3["table3"].size() == 1);
}

TEST_CASE("cli outputs are byte-identical across reruns with one seed") {
  TempDir dir;
  const fs::path csv = dir.path / "base.csv";
  REQUIRE(run_cli("surrogate-gen --n 500 --features 4 --seed 11 --out " + csv.string())
              .exit_code == 0);

  auto run_all = [&](const fs::path& root) {
    fs::create_directories(root);
    const fs::path model = root / "model.json";
    REQUIRE(run_cli("train --csv " + csv.string() + " --target outcome --out-model " +
                    model.string() + " --rounds 40 --bags 2 --max-bins 16 --seed 21")
                .exit_code == 0);
    const fs::path imputed = root / "imp.csv";
    REQUIRE(run_cli("impute --csv " + csv.string() + " --method knn --k 5 --out " +
                    imputed.string() + " --seed 21")
                .exit_code == 0);
    const fs::path sim = root / "sim.json";
    REQUIRE(run_cli("simulate --table1 --reps 2 --pm 0.2 --n 250 --features 4 --seed 21 --out " +
                    sim.string())
                .exit_code == 0);
    return slurp(model) + "|" + slurp(imputed) + "|" + slurp(sim);
  };

  const std::string a = run_all(dir.path / "a");
  const std::string b = run_all(dir.path / "b");
  CHECK(a == b);
}
