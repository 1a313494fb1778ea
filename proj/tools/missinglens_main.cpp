#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>

#include "missinglens/csv.hpp"
#include "missinglens/editing.hpp"
#include "missinglens/gam.hpp"
#include "missinglens/imputation.hpp"
#include "missinglens/missingness.hpp"
#include "missinglens/svg.hpp"
#include "missinglens/synthgen.hpp"
#include "missinglens/table.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace missinglens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitHarmful = 4;
constexpr int kExitNothingToTest = 5;

std::uint64_t env_seed_default() {
  if (const char* env = std::getenv("MISSINGLENS_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      return 0;
    }
  }
  return 0;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open file for writing: " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// every run records its resolved configuration next to the primary output
void write_run_config(const fs::path& primary_out, const std::string& subcommand,
                      const json& resolved) {
  json echo;
  echo["subcommand"] = subcommand;
  echo["resolved"] = resolved;
  fs::path p = primary_out;
  p += ".run.json";
  write_json(p, echo);
}

json segments_to_json(const std::vector<ShapeSegment>& segs, const char* group) {
  json arr = json::array();
  for (const auto& s : segs) {
    arr.push_back(
        {{"lo", s.lo}, {"hi", s.hi}, {"score", s.score}, {"count", s.count}, {"group", group}});
  }
  return arr;
}

json shape_to_json(const GamModel& model, const std::string& feature) {
  json j;
  j["feature"] = feature;
  j["link"] = to_string(model.link);
  json entries = json::array();
  for (const auto& term : to_indicator_form(model, feature)) {
    json e;
    e["score"] = term.score;
    e["count"] = term.count;
    if (term.is_missing) e["missing"] = true;
    if (term.is_category) {
      e["category"] = term.category;
    } else {
      e["lo"] = term.lo;
      e["hi"] = term.hi;
    }
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  return j;
}

json wald_to_json(const WaldReport& r) {
  return json{{"feature", r.feature},
              {"theta_hat", r.theta_hat},
              {"se", std::isfinite(r.se) ? json(r.se) : json("inf")},
              {"z", r.z},
              {"p_value", r.p_value},
              {"alpha", r.alpha},
              {"reject_mcar", r.reject_mcar},
              {"converged", r.converged},
              {"missing_count", r.missing_count}};
}

json little_to_json(const LittleReport& r) {
  return json{{"chi2", r.chi2},
              {"df", r.df},
              {"p_value", r.p_value},
              {"n_patterns", r.n_patterns},
              {"nothing_to_test", r.nothing_to_test},
              {"singular_adjusted", r.singular_adjusted},
              {"em_converged", r.em_converged},
              {"em_iterations", r.em_iterations}};
}

json audit_to_json(const SpikeAudit& a) {
  json diffs = json::array(), scores = json::array(), flagged = json::array();
  for (Eigen::Index i = 0; i < a.bin_diffs.size(); ++i) diffs.push_back(a.bin_diffs[i]);
  for (Eigen::Index i = 0; i < a.anomaly_scores.size(); ++i) scores.push_back(a.anomaly_scores[i]);
  for (int b : a.flagged_bins) flagged.push_back(b);
  return json{{"feature", a.feature},
              {"verdict", to_string(a.verdict)},
              {"contamination", a.contamination},
              {"mean_bin", a.mean_bin},
              {"median_bin", a.median_bin},
              {"mean_value", a.mean_value},
              {"median_value", a.median_value},
              {"flagged_bins", flagged},
              {"bin_diffs", diffs},
              {"anomaly_scores", scores}};
}

CsvOptions csv_options(char delimiter, const std::string& target = "") {
  CsvOptions opt;
  opt.delimiter = delimiter;
  opt.target = target;
  return opt;
}

struct TrainArgs {
  std::string csv, target, out_model, out_dir, link = "auto";
  char delimiter = ',';
  GamConfig gam;
};

int cmd_train(const TrainArgs& args) {
  Table table = load_csv(args.csv, csv_options(args.delimiter, args.target));
  GamConfig cfg = args.gam;
  if (args.link != "auto") cfg.link = link_from_string(args.link);
  GamModel model = fit_gam(table, args.target, cfg);
  save_model(model, args.out_model);

  json resolved{{"csv", args.csv},
                {"target", args.target},
                {"out_model", args.out_model},
                {"out_dir", args.out_dir},
                {"link", to_string(model.link)},
                {"max_bins", cfg.max_bins},
                {"learning_rate", cfg.learning_rate},
                {"rounds", cfg.rounds},
                {"bags", cfg.bags},
                {"depth", cfg.depth},
                {"holdout_fraction", cfg.holdout_fraction},
                {"patience", cfg.patience},
                {"seed", cfg.seed}};
  write_run_config(args.out_model, "train", resolved);

  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    for (const auto& shape : model.shapes) {
      write_json(fs::path(args.out_dir) / (shape.feature + ".shape.json"),
                 shape_to_json(model, shape.feature));
      SvgOptions svg;
      svg.title = shape.feature;
      write_text(fs::path(args.out_dir) / (shape.feature + ".svg"), shape_svg(shape, svg));
    }
  }

  std::cout << "trained " << to_string(model.link) << " model on " << table.n_rows << " rows, "
            << model.shapes.size() << " features -> " << args.out_model << "\n";
  auto importance = variable_importance(model);
  std::cout << "top features:";
  for (std::size_t i = 0; i < std::min<std::size_t>(3, importance.size()); ++i)
    std::cout << " " << importance[i].first;
  std::cout << "\n";
  return kExitOk;
}

struct DiagnoseArgs {
  std::string model, csv, mcar_feature, predict_feature, out;
  bool little = false;
  bool no_label = false;
  double alpha = 0.05;
  char delimiter = ',';
  std::uint64_t seed = 0;
  std::string target;
};

int cmd_diagnose(const DiagnoseArgs& args) {
  Table table = load_csv(args.csv, csv_options(args.delimiter, args.target));
  json out;
  json resolved{{"csv", args.csv},   {"model", args.model}, {"alpha", args.alpha},
                {"seed", args.seed}, {"little", args.little}, {"mcar", args.mcar_feature},
                {"predict_missingness", args.predict_feature}};
  int exit_code = kExitOk;

  if (args.little) {
    LittleReport report = littles_test(table);
    out["little"] = little_to_json(report);
    std::cout << "little's test: chi2=" << report.chi2 << " df=" << report.df
              << " p=" << report.p_value
              << (report.nothing_to_test ? " (nothing to test)" : "") << "\n";
  } else if (!args.mcar_feature.empty()) {
    GamModel model = load_model(args.model);
    WaldReport report = wald_mcar_test(model, table, args.mcar_feature, args.alpha);
    out["wald_mcar"] = wald_to_json(report);
    std::cout << "wald MCAR test on '" << report.feature << "': theta=" << report.theta_hat
              << " se=" << report.se << " z=" << report.z << " p=" << report.p_value << " -> "
              << (report.reject_mcar ? "reject MCAR" : "no evidence against MCAR") << "\n";
  } else if (!args.predict_feature.empty()) {
    MissingnessConfig mc;
    mc.seed = args.seed;
    mc.gam.seed = args.seed;
    mc.gam.max_bins = 64;
    mc.gam.rounds = 250;
    mc.gam.learning_rate = 0.05;
    mc.gam.bags = 4;
    MissingnessReport report =
        fit_missingness_model(table, args.predict_feature, !args.no_label, mc);
    json jr{{"feature", report.feature},
            {"auc", report.auc_value},
            {"accuracy", report.accuracy},
            {"n_test", report.n_test}};
    json preds = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, report.top_predictors.size()); ++i)
      preds.push_back(
          {{"feature", report.top_predictors[i].first},
           {"importance", report.top_predictors[i].second}});
    jr["top_predictors"] = preds;
    json curves;
    for (const auto& [name, c] : report.separated_shapes) {
      json cj;
      cj["offset"] = c.offset;
      json entries = segments_to_json(c.observed, "observed");
      for (auto& e : segments_to_json(c.imputed, "imputed")) entries.push_back(e);
      cj["entries"] = entries;
      curves[name] = cj;
    }
    jr["separated_shapes"] = curves;
    out["missingness"] = jr;
    std::cout << "predicting missingness of '" << report.feature
              << "': auc=" << report.auc_value << " accuracy=" << report.accuracy
              << "\ntop predictors:";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, report.top_predictors.size()); ++i)
      std::cout << " " << report.top_predictors[i].first;
    std::cout << "\n";
  } else {
    std::cerr << "diagnose: choose one of --mcar, --little, --predict-missingness\n";
    return kExitUsage;
  }

  if (!args.out.empty()) {
    write_json(args.out, out);
    write_run_config(args.out, "diagnose", resolved);
  }
  return exit_code;
}

struct ImputeArgs {
  std::string csv, method = "mean", feature, out;
  double constant = 0;
  int k = 5;
  int trees = 100;
  int max_iter = 10;
  char delimiter = ',';
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_impute(const ImputeArgs& args) {
  Table table = load_csv(args.csv, csv_options(args.delimiter));
  ImputedTable result;
  if (args.method == "knn") {
    result = impute_knn(table, args.k, args.seed);
  } else if (args.method == "forest") {
    ImputerConfig cfg;
    cfg.method = ImputeMethod::IterativeForest;
    cfg.n_trees = args.trees;
    cfg.max_iter = args.max_iter;
    cfg.seed = args.seed;
    cfg.n_threads = args.threads;
    result = impute_iterative_forest(table, cfg);
  } else {
    ImputeMethod method;
    if (args.method == "mean") method = ImputeMethod::Mean;
    else if (args.method == "median") method = ImputeMethod::Median;
    else if (args.method == "constant") method = ImputeMethod::Constant;
    else throw ValueError("unknown imputation method: " + args.method);

    std::vector<std::string> features;
    if (!args.feature.empty()) {
      features.push_back(args.feature);
    } else {
      for (const auto& col : table.columns) {
        if (col.n_missing() == 0) continue;
        if (method != ImputeMethod::Constant && col.kind == ColumnKind::Categorical) continue;
        features.push_back(col.name);
      }
    }
    result.table = table;
    for (const auto& f : features) {
      ImputedTable step = impute_simple(result.table, f, method, args.constant);
      result.table = std::move(step.table);
      for (auto& rec : step.records) result.records.push_back(std::move(rec));
    }
  }

  write_csv(result.table, args.out, args.delimiter);
  json prov;
  prov["method"] = args.method;
  prov["sweeps"] = result.sweeps;
  json records = json::array();
  for (const auto& rec : result.records) {
    json rows = json::array(), values = json::array();
    for (auto r : rec.rows) rows.push_back(r);
    for (Eigen::Index i = 0; i < rec.values.size(); ++i) values.push_back(rec.values[i]);
    records.push_back({{"column", rec.column},
                       {"method", rec.method},
                       {"rows", rows},
                       {"values", values},
                       {"fallback", rec.fallback}});
  }
  prov["records"] = std::move(records);
  fs::path prov_path = args.out;
  prov_path += ".provenance.json";
  write_json(prov_path, prov);

  write_run_config(args.out, "impute",
                   json{{"csv", args.csv},
                        {"method", args.method},
                        {"feature", args.feature},
                        {"constant", args.constant},
                        {"k", args.k},
                        {"trees", args.trees},
                        {"max_iter", args.max_iter},
                        {"seed", args.seed}});
  std::cout << "imputed " << result.records.size() << " column(s) -> " << args.out << "\n";
  return kExitOk;
}

struct AuditArgs {
  std::string model, csv, statistic = "mean", out, svg_dir;
  double contamination = 0.05;
  char delimiter = ',';
  std::uint64_t seed = 0;
};

int cmd_audit(const AuditArgs& args) {
  GamModel model = load_model(args.model);
  Table table = load_csv(args.csv, csv_options(args.delimiter));
  const AuditStatistic stat =
      args.statistic == "median" ? AuditStatistic::Median : AuditStatistic::Mean;
  auto audits = audit_imputation(model, table, stat, args.contamination, args.seed);

  json out;
  out["statistic"] = args.statistic;
  out["contamination"] = args.contamination;
  json arr = json::array();
  bool any_harmful = false;
  for (const auto& a : audits) {
    arr.push_back(audit_to_json(a));
    any_harmful = any_harmful || a.verdict == AuditVerdict::Harmful;
  }
  out["audits"] = std::move(arr);
  out["any_harmful"] = any_harmful;
  if (!args.out.empty()) {
    write_json(args.out, out);
    write_run_config(args.out, "audit",
                     json{{"model", args.model},
                          {"csv", args.csv},
                          {"statistic", args.statistic},
                          {"contamination", args.contamination},
                          {"seed", args.seed}});
  }

  if (!args.svg_dir.empty()) {
    fs::create_directories(args.svg_dir);
    for (const auto& a : audits) {
      const int fidx = model.feature_index(a.feature);
      if (fidx < 0) continue;
      SvgOptions svg;
      svg.title = a.feature + " [" + to_string(a.verdict) + "]";
      if (a.verdict != AuditVerdict::NotApplicable) svg.mean_line = a.mean_value;
      svg.highlight_bins = a.flagged_bins;
      write_text(fs::path(args.svg_dir) / (a.feature + ".audit.svg"),
                 shape_svg(model.shapes[static_cast<std::size_t>(fidx)], svg));
    }
  }

  for (const auto& a : audits)
    std::cout << a.feature << ": " << to_string(a.verdict) << "\n";
  return any_harmful ? kExitHarmful : kExitOk;
}

struct EditArgs {
  std::string model, script, out, emit_diff;
};

int cmd_edit(const EditArgs& args) {
  GamModel model = load_model(args.model);
  std::ifstream in(args.script);
  if (!in) throw ParseError("cannot open edit script: " + args.script);
  json js;
  try {
    in >> js;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad edit script: ") + e.what());
  }
  EditScript script = EditScript::from_json(js);
  GamModel edited = apply_edit(model, script);
  save_model(edited, args.out);
  write_run_config(args.out, "edit",
                   json{{"model", args.model}, {"script", args.script}, {"out", args.out}});

  if (!args.emit_diff.empty()) {
    ModelDiff diff = diff_models(model, edited);
    json dj;
    dj["intercept_before"] = diff.intercept_before;
    dj["intercept_after"] = diff.intercept_after;
    json bins = json::array();
    for (const auto& b : diff.bins) {
      bins.push_back({{"feature", b.feature},
                      {"lo", b.lo},
                      {"hi", b.hi},
                      {"missing_bin", b.missing_bin},
                      {"before", b.before},
                      {"after", b.after}});
    }
    dj["bins"] = std::move(bins);
    write_json(args.emit_diff, dj);
  }
  std::cout << "applied " << script.edits.size() << " edit(s) -> " << args.out << "\n";
  return kExitOk;
}

struct SimulateArgs {
  bool table1 = false, table3 = false;
  int reps = 0;
  std::vector<double> pms = {0.1, 0.2, 0.3};
  double alpha = 0.05;
  std::uint64_t seed = 1;
  Index n = 2000;
  int features = 10;
  std::string mechanism = "MAR";
  std::vector<std::string> score_models = {"linear", "curvilinear", "quadratic"};
  std::string out;
  int threads = 0;
};

int cmd_simulate(const SimulateArgs& args) {
  if (args.reps < 1) {
    std::cerr << "simulate: --reps must be at least 1\n";
    return kExitUsage;
  }
  if (args.table1 == args.table3) {
    std::cerr << "simulate: choose exactly one of --table1 or --table3\n";
    return kExitUsage;
  }
  SurrogateConfig scfg;
  scfg.n = args.n;
  scfg.p = args.features;
  scfg.seed = args.seed;
  Table base = make_surrogate(scfg);
  json out;
  json resolved{{"reps", args.reps}, {"pms", args.pms},   {"alpha", args.alpha},
                {"seed", args.seed}, {"n", args.n},       {"features", args.features},
                {"mechanism", args.mechanism}, {"threads", args.threads}};

  if (args.table1) {
    McarBenchConfig cfg;
    cfg.reps = args.reps;
    cfg.pms = args.pms;
    cfg.alpha = args.alpha;
    cfg.seed = args.seed;
    cfg.n_threads = args.threads;
    auto cells = run_mcar_benchmark(base, cfg);
    json arr = json::array();
    std::cout << "mechanism  p_m    wald_rate  little_rate  (reps=" << args.reps << ")\n";
    char line[128];
    for (const auto& c : cells) {
      arr.push_back({{"mechanism", to_string(c.mechanism)},
                     {"p_m", c.p_m},
                     {"reps", c.reps},
                     {"wald_rate", c.wald_rate},
                     {"wald_se", c.wald_se},
                     {"little_rate", c.little_rate},
                     {"little_se", c.little_se}});
      std::snprintf(line, sizeof(line), "%-9s  %-5.2f  %-9.3f  %-9.3f", to_string(c.mechanism).c_str(),
                    c.p_m, c.wald_rate, c.little_rate);
      std::cout << line << "\n";
    }
    out["table1"] = std::move(arr);
  } else {
    PredBenchConfig cfg;
    cfg.reps = args.reps;
    cfg.pms = args.pms;
    cfg.seed = args.seed;
    cfg.mechanism = mechanism_from_string(args.mechanism);
    cfg.score_models.clear();
    for (const auto& s : args.score_models) cfg.score_models.push_back(score_model_from_string(s));
    cfg.n_threads = args.threads;
    auto cells = run_missingness_benchmark(base, cfg);
    json arr = json::array();
    std::cout << "score_model  p_m    EBM            LR             RF             KNN\n";
    char line[160];
    for (const auto& c : cells) {
      arr.push_back({{"mechanism", to_string(c.mechanism)},
                     {"score_model", to_string(c.score_model)},
                     {"p_m", c.p_m},
                     {"reps", c.reps},
                     {"ebm", {{"mean", c.ebm.mean}, {"sd", c.ebm.sd}}},
                     {"lr", {{"mean", c.lr.mean}, {"sd", c.lr.sd}}},
                     {"rf", {{"mean", c.rf.mean}, {"sd", c.rf.sd}}},
                     {"knn", {{"mean", c.knn.mean}, {"sd", c.knn.sd}}}});
      std::snprintf(line, sizeof(line),
                    "%-11s  %-5.2f  %.3f+/-%.3f  %.3f+/-%.3f  %.3f+/-%.3f  %.3f+/-%.3f",
                    to_string(c.score_model).c_str(), c.p_m, c.ebm.mean, c.ebm.sd, c.lr.mean,
                    c.lr.sd, c.rf.mean, c.rf.sd, c.knn.mean, c.knn.sd);
      std::cout << line << "\n";
    }
    out["table3"] = std::move(arr);
  }

  if (!args.out.empty()) {
    write_json(args.out, out);
    write_run_config(args.out, "simulate", resolved);
  }
  return kExitOk;
}

struct SurrogateArgs {
  Index n = 5000;
  int features = 14;
  std::uint64_t seed = 1;
  std::string out;
  std::string kind = "default";
};

int cmd_surrogate(const SurrogateArgs& args) {
  if (args.kind == "assumed-normal") {
    AssumedNormalSurrogate surrogate = make_assumed_normal_surrogate(args.n, args.seed);
    Table masked = surrogate.table;
    Column& col = masked.column(surrogate.feature);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Index i = 0; i < masked.n_rows; ++i) {
      if (surrogate.mask[static_cast<std::size_t>(i)]) {
        col.values[i] = nan;
        col.missing[static_cast<std::size_t>(i)] = 1;
      }
    }
    write_csv(masked, args.out);
  } else if (args.kind == "default") {
    SurrogateConfig cfg;
    cfg.n = args.n;
    cfg.p = args.features;
    cfg.seed = args.seed;
    write_csv(make_surrogate(cfg), args.out);
  } else {
    throw ValueError("unknown surrogate kind: " + args.kind);
  }
  write_run_config(args.out, "surrogate-gen",
                   json{{"n", args.n}, {"features", args.features}, {"seed", args.seed},
                        {"kind", args.kind}});
  std::cout << "wrote " << args.kind << " surrogate -> " << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"missinglens: glass-box additive models for missing-value diagnostics"};
  app.require_subcommand(1);
  const std::uint64_t default_seed = env_seed_default();

  TrainArgs train;
  train.gam.seed = default_seed;
  auto* t = app.add_subcommand("train", "train an additive model and export its shapes");
  t->add_option("--csv", train.csv, "input CSV")->required();
  t->add_option("--target", train.target, "target column")->required();
  t->add_option("--out-model", train.out_model, "output model JSON")->required();
  t->add_option("--out-dir", train.out_dir, "directory for shape JSON/SVG exports");
  t->add_option("--link", train.link, "auto|identity|logistic");
  t->add_option("--max-bins", train.gam.max_bins);
  t->add_option("--learning-rate", train.gam.learning_rate);
  t->add_option("--rounds", train.gam.rounds);
  t->add_option("--bags", train.gam.bags);
  t->add_option("--depth", train.gam.depth);
  t->add_option("--holdout", train.gam.holdout_fraction);
  t->add_option("--patience", train.gam.patience);
  t->add_option("--seed", train.gam.seed);
  t->add_option("--threads", train.gam.n_threads);
  t->add_option("--delimiter", train.delimiter);

  DiagnoseArgs diag;
  diag.seed = default_seed;
  auto* d = app.add_subcommand("diagnose", "missingness diagnostics");
  d->add_option("--model", diag.model, "trained model JSON");
  d->add_option("--csv", diag.csv, "input CSV")->required();
  d->add_option("--mcar", diag.mcar_feature, "wald MCAR test on this feature");
  d->add_flag("--little", diag.little, "little's MCAR test");
  d->add_option("--predict-missingness", diag.predict_feature,
                "train a model for this feature's missingness");
  d->add_option("--alpha", diag.alpha);
  d->add_option("--out", diag.out, "report JSON path");
  d->add_option("--seed", diag.seed);
  d->add_option("--target", diag.target, "target column of the csv");
  d->add_flag("--no-label", diag.no_label, "exclude the target column as a predictor");
  d->add_option("--delimiter", diag.delimiter);

  ImputeArgs imp;
  imp.seed = default_seed;
  auto* i = app.add_subcommand("impute", "fill missing cells");
  i->add_option("--csv", imp.csv)->required();
  i->add_option("--method", imp.method, "mean|median|constant|knn|forest");
  i->add_option("--feature", imp.feature, "restrict simple imputers to one column");
  i->add_option("--value", imp.constant, "constant imputation value");
  i->add_option("--k", imp.k, "KNN neighbors");
  i->add_option("--trees", imp.trees, "forest size");
  i->add_option("--max-iter", imp.max_iter, "forest sweeps");
  i->add_option("--out", imp.out, "output CSV")->required();
  i->add_option("--seed", imp.seed);
  i->add_option("--threads", imp.threads);
  i->add_option("--delimiter", imp.delimiter);

  AuditArgs audit;
  audit.seed = default_seed;
  auto* a = app.add_subcommand("audit", "detect risky mean/median imputations");
  a->add_option("--model", audit.model)->required();
  a->add_option("--csv", audit.csv)->required();
  a->add_option("--statistic", audit.statistic, "mean|median");
  a->add_option("--contamination", audit.contamination);
  a->add_option("--out", audit.out, "audit JSON path");
  a->add_option("--svg-dir", audit.svg_dir, "annotated SVG directory");
  a->add_option("--seed", audit.seed);
  a->add_option("--delimiter", audit.delimiter);

  EditArgs edit;
  auto* e = app.add_subcommand("edit", "apply a shape edit script");
  e->add_option("--model", edit.model)->required();
  e->add_option("--script", edit.script)->required();
  e->add_option("--out", edit.out)->required();
  e->add_option("--emit-diff", edit.emit_diff, "write a before/after bin diff");

  SimulateArgs sim;
  sim.seed = default_seed ? default_seed : 1;
  auto* s = app.add_subcommand("simulate", "benchmark harnesses on the surrogate generator");
  s->add_flag("--table1", sim.table1, "MCAR test calibration/power grid");
  s->add_flag("--table3", sim.table3, "missingness prediction accuracy grid");
  s->add_option("--reps", sim.reps, "replicates per cell")->required();
  s->add_option("--pm", sim.pms, "missing ratios");
  s->add_option("--alpha", sim.alpha);
  s->add_option("--seed", sim.seed);
  s->add_option("--n", sim.n, "surrogate rows");
  s->add_option("--features", sim.features, "surrogate feature count");
  s->add_option("--mechanism", sim.mechanism, "MAR|MNAR (table3)");
  s->add_option("--score-model", sim.score_models, "linear|curvilinear|quadratic (table3)");
  s->add_option("--out", sim.out, "results JSON path");
  s->add_option("--threads", sim.threads);

  SurrogateArgs sur;
  sur.seed = default_seed ? default_seed : 1;
  auto* g = app.add_subcommand("surrogate-gen", "write a surrogate dataset CSV");
  g->add_option("--n", sur.n);
  g->add_option("--features", sur.features);
  g->add_option("--seed", sur.seed);
  g->add_option("--kind", sur.kind, "default|assumed-normal");
  g->add_option("--out", sur.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return ex.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train);
    if (d->parsed()) return cmd_diagnose(diag);
    if (i->parsed()) return cmd_impute(imp);
    if (a->parsed()) return cmd_audit(audit);
    if (e->parsed()) return cmd_edit(edit);
    if (s->parsed()) return cmd_simulate(sim);
    if (g->parsed()) return cmd_surrogate(sur);
  } catch (const NothingToTest& ex) {
    std::cerr << "nothing to test: " << ex.what() << "\n";
    return kExitNothingToTest;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
