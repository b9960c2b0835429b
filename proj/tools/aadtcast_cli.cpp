// Command-line driver over the aadtcast C interface.
#include "aadtcast/aadtcast.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Failure {
  int status;
  std::string code;
  std::string message;
};

std::string quoted(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

void check(int status) {
  if (status != AADT_OK) throw Failure{status, aadt_last_error_code(), aadt_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw Failure{AADT_ERR_USAGE, "usage", message}; }

struct SeriesDeleter {
  void operator()(aadt_series* p) const { aadt_series_free(p); }
};
struct ConfigDeleter {
  void operator()(aadt_config* p) const { aadt_config_free(p); }
};
struct ModelDeleter {
  void operator()(aadt_model* p) const { aadt_model_free(p); }
};
struct ReportDeleter {
  void operator()(aadt_report* p) const { aadt_report_free(p); }
};
using Series = std::unique_ptr<aadt_series, SeriesDeleter>;
using Config = std::unique_ptr<aadt_config, ConfigDeleter>;
using Model = std::unique_ptr<aadt_model, ModelDeleter>;
using Report = std::unique_ptr<aadt_report, ReportDeleter>;

Series load_series(const std::string& path) {
  aadt_series* s = nullptr;
  check(aadt_series_load_csv(path.c_str(), &s));
  return Series(s);
}

std::optional<Series> load_optional(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_series(path);
}

/// Training options shared by train and grid; empty values leave the
/// config untouched.
struct TrainingFlags {
  std::string config_file;
  std::string cell;
  std::string treatment;
  std::optional<int> horizon_years;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> window;
  std::optional<std::size_t> stride;
  std::optional<int> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<int> test_years;
  std::optional<unsigned> threads;
  std::vector<std::string> settings;

  void add_to(CLI::App* app, bool with_model_choice) {
    app->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
    if (with_model_choice) {
      app->add_option("--cell", cell, "SimpleRnn, Gru or Lstm");
      app->add_option("--treatment", treatment, "Masking, Mean, Median, EM, MICE, KNN or RF");
      app->add_option("--horizon-years", horizon_years, "forecast horizon in years")->check(CLI::Range(1, 3));
    }
    app->add_option("--hidden", hidden, "hidden units");
    app->add_option("--window", window, "training window length in hours");
    app->add_option("--stride", stride, "training window stride in hours");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--batch", batch, "windows per batch");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--test-years", test_years, "calendar years held out for testing");
    app->add_option("--threads", threads, "worker threads per training");
    app->add_option("--set", settings, "extra key=value configuration settings");
  }

  Config build() const {
    aadt_config* raw = nullptr;
    if (config_file.empty()) {
      check(aadt_config_new(&raw));
    } else {
      check(aadt_config_load(config_file.c_str(), &raw));
    }
    Config cfg(raw);
    auto set = [&](const char* key, const std::string& value) {
      check(aadt_config_set(cfg.get(), key, value.c_str()));
    };
    if (!cell.empty()) set("cell_kind", cell);
    if (!treatment.empty()) set("treatment", treatment);
    if (horizon_years) set("horizon_years", std::to_string(*horizon_years));
    if (hidden) set("hidden_size", std::to_string(*hidden));
    if (window) set("window_length", std::to_string(*window));
    if (stride) set("window_stride", std::to_string(*stride));
    if (epochs) set("epochs", std::to_string(*epochs));
    if (batch) set("batch_size", std::to_string(*batch));
    if (lr) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", *lr);
      set("learning_rate", buf);
    }
    if (seed) set("seed", std::to_string(*seed));
    if (test_years) set("test_years", std::to_string(*test_years));
    if (threads) set("threads", std::to_string(*threads));
    for (const auto& kv : settings) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) usage("--set expects key=value, got '" + kv + "'");
      set(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void print_best(const aadt_report* report) {
  for (size_t i = 0; i < aadt_report_best_count(report); ++i) {
    aadt_best_variant b{};
    check(aadt_report_best_get(report, i, &b));
    std::printf("best horizon=%lld year=%d cell=%s treatment=%s accuracy=%.2f%%\n",
                static_cast<long long>(b.horizon_hours), b.year, b.cell, b.treatment, b.accuracy_pct);
  }
}

void print_skips(const aadt_report* report) {
  for (size_t i = 0; i < aadt_report_skip_count(report); ++i) {
    int64_t h = 0;
    const char* reason = aadt_report_skip_reason(report, i, &h);
    std::printf("skipped horizon=%lld reason=\"%s\"\n", static_cast<long long>(h), reason ? reason : "");
  }
}

void save_report(const aadt_report* report, const std::string& prefix) {
  const std::string csv = prefix + ".csv";
  const std::string json = prefix + ".json";
  check(aadt_report_save_csv(report, csv.c_str()));
  check(aadt_report_save_json(report, json.c_str()));
  std::printf("report %s %s\n", csv.c_str(), json.c_str());
}

std::string strip_csv(std::string path) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0) path.resize(path.size() - 4);
  return path;
}

int run(int argc, char** argv) {
  CLI::App app{"Hourly traffic volume forecasting and AADT evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(aadt_version()));

  std::string in_csv, out_path, model_path, spec_path, method, truth_path, csv_out, json_out, trend_out;
  std::vector<int> horizon_years_list;
  unsigned jobs = 0;
  std::vector<std::string> cells;
  int seeds = 20;
  TrainingFlags tf;

  auto* ingest = app.add_subcommand("ingest", "validate a CSV and summarize it");
  ingest->add_option("csv", in_csv)->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic series and its ground truth");
  synth->add_option("spec", spec_path, "key = value synthetic spec")->required()->check(CLI::ExistingFile);
  synth->add_option("out", out_path, "output prefix; writes <out>.csv and <out>.truth.csv")->required();

  auto* impute = app.add_subcommand("impute", "fill gaps with one treatment");
  impute->add_option("--method", method, "Mean, Median, EM, MICE, KNN or RF")->required();
  impute->add_option("--truth", truth_path, "complete series for RMSE")->check(CLI::ExistingFile);
  impute->add_option("--config", tf.config_file, "configuration file")->check(CLI::ExistingFile);
  impute->add_option("in", in_csv)->required();
  impute->add_option("out", out_path)->required();

  auto* train = app.add_subcommand("train", "train one forecasting model");
  tf.add_to(train, true);
  train->add_option("csv", in_csv)->required();
  train->add_option("model", model_path)->required();

  auto* predict = app.add_subcommand("predict", "write predicted hourly volumes");
  predict->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  predict->add_option("csv", in_csv)->required();
  predict->add_option("out", out_path)->required();

  auto* evaluate = app.add_subcommand("evaluate", "per-year AADT accuracy of a model");
  evaluate->add_option("model", model_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("csv", in_csv)->required();
  evaluate->add_option("--truth", truth_path, "complete actuals")->check(CLI::ExistingFile);
  evaluate->add_option("--csv-out", csv_out, "write the report as CSV");
  evaluate->add_option("--json-out", json_out, "write the report as JSON");
  evaluate->add_option("--trend-out", trend_out, "write the predicted hourly trend");

  TrainingFlags grid_flags;
  auto* grid = app.add_subcommand("grid", "train and score all 21 cell x treatment variants");
  grid_flags.add_to(grid, false);
  grid->add_option("csv", in_csv)->required();
  grid->add_option("--horizon-years", horizon_years_list, "horizons in years")->check(CLI::Range(1, 3));
  grid->add_option("--jobs", jobs, "concurrent trainings; 0 uses every core");
  grid->add_option("--truth", truth_path, "complete actuals")->check(CLI::ExistingFile);
  grid->add_option("--out", out_path, "report prefix")->default_val("grid_report");

  TrainingFlags horizon_flags;
  auto* horizons = app.add_subcommand("horizons", "score one variant at 1, 2 and 3 year horizons");
  horizon_flags.add_to(horizons, true);
  horizons->add_option("csv", in_csv)->required();
  horizons->add_option("--truth", truth_path, "complete actuals")->check(CLI::ExistingFile);
  horizons->add_option("--out", out_path, "report prefix")->default_val("horizon_report");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the network gradients");
  gradcheck->add_option("--cell", cells, "cell kinds to check; default all");
  gradcheck->add_option("--seeds", seeds, "random networks per cell")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    usage(e.what());
  }

  if (ingest->parsed()) {
    const Series s = load_series(in_csv);
    aadt_series_summary sum{};
    check(aadt_series_summary_get(s.get(), &sum));
    std::printf("station=%s length=%zu start=%s end=%s missing=%zu missing_pct=%.2f\n", sum.station, sum.length,
                sum.start, sum.end, sum.missing, sum.missing_pct);
  } else if (synth->parsed()) {
    aadt_series* g = nullptr;
    aadt_series* t = nullptr;
    check(aadt_synth_from_file(spec_path.c_str(), &g, &t));
    const Series gappy(g), truth(t);
    const std::string base = strip_csv(out_path);
    const std::string gp = base + ".csv", tp = base + ".truth.csv";
    check(aadt_series_save_csv(gappy.get(), gp.c_str()));
    check(aadt_series_save_csv(truth.get(), tp.c_str()));
    aadt_series_summary sum{};
    check(aadt_series_summary_get(gappy.get(), &sum));
    std::printf("wrote %s %s length=%zu missing=%zu\n", gp.c_str(), tp.c_str(), sum.length, sum.missing);
  } else if (impute->parsed()) {
    const Series s = load_series(in_csv);
    Config cfg = tf.build();
    aadt_series* raw = nullptr;
    size_t filled = 0;
    check(aadt_impute(s.get(), method.c_str(), cfg.get(), &raw, &filled));
    const Series out(raw);
    check(aadt_series_save_csv(out.get(), out_path.c_str()));
    std::printf("filled=%zu", filled);
    if (!truth_path.empty()) {
      const Series truth = load_series(truth_path);
      double rmse = 0.0;
      check(aadt_imputation_rmse(out.get(), truth.get(), s.get(), &rmse));
      std::printf(" rmse=%.6g", rmse);
    }
    std::printf("\n");
  } else if (train->parsed()) {
    const Series s = load_series(in_csv);
    Config cfg = tf.build();
    aadt_model* raw = nullptr;
    check(aadt_train(s.get(), cfg.get(), &raw));
    const Model model(raw);
    check(aadt_model_save(model.get(), model_path.c_str()));
    size_t n = 0;
    check(aadt_model_loss_trace(model.get(), nullptr, 0, &n));
    std::vector<double> trace(n);
    check(aadt_model_loss_trace(model.get(), trace.data(), n, &n));
    std::printf("model=%s epochs=%zu first_loss=%.6g final_loss=%.6g\n", model_path.c_str(), n,
                n ? trace.front() : NAN, n ? trace.back() : NAN);
  } else if (predict->parsed()) {
    aadt_model* m = nullptr;
    check(aadt_model_load(model_path.c_str(), &m));
    const Model model(m);
    const Series s = load_series(in_csv);
    aadt_series* p = nullptr;
    check(aadt_predict(model.get(), s.get(), &p));
    const Series pred(p);
    check(aadt_prediction_save_csv(pred.get(), out_path.c_str()));
    aadt_series_summary sum{};
    check(aadt_series_summary_get(pred.get(), &sum));
    std::printf("wrote %s hours=%zu start=%s\n", out_path.c_str(), sum.length, sum.start);
  } else if (evaluate->parsed()) {
    aadt_model* m = nullptr;
    check(aadt_model_load(model_path.c_str(), &m));
    const Model model(m);
    const Series s = load_series(in_csv);
    const auto truth = load_optional(truth_path);
    aadt_report* r = nullptr;
    check(aadt_evaluate(model.get(), s.get(), truth ? truth->get() : nullptr, &r));
    const Report report(r);
    std::fputs(aadt_report_table(report.get()), stdout);
    if (!csv_out.empty()) check(aadt_report_save_csv(report.get(), csv_out.c_str()));
    if (!json_out.empty()) check(aadt_report_save_json(report.get(), json_out.c_str()));
    if (!trend_out.empty()) check(aadt_report_save_trend(report.get(), 0, trend_out.c_str()));
  } else if (grid->parsed()) {
    const Series s = load_series(in_csv);
    Config cfg = grid_flags.build();
    const auto truth = load_optional(truth_path);
    std::vector<int64_t> hs;
    for (int y : horizon_years_list) hs.push_back(static_cast<int64_t>(y) * 8760);
    aadt_report* r = nullptr;
    check(aadt_grid(s.get(), cfg.get(), hs.data(), hs.size(), jobs, truth ? truth->get() : nullptr, &r));
    const Report report(r);
    std::fputs(aadt_report_table(report.get()), stdout);
    print_skips(report.get());
    print_best(report.get());
    save_report(report.get(), out_path);
  } else if (horizons->parsed()) {
    const Series s = load_series(in_csv);
    Config cfg = horizon_flags.build();
    const auto truth = load_optional(truth_path);
    aadt_report* r = nullptr;
    check(aadt_multi_horizon(s.get(), cfg.get(), nullptr, 0, truth ? truth->get() : nullptr, &r));
    const Report report(r);
    std::fputs(aadt_report_table(report.get()), stdout);
    print_skips(report.get());
    save_report(report.get(), out_path);
  } else if (gradcheck->parsed()) {
    if (cells.empty()) cells = {"SimpleRnn", "Gru", "Lstm"};
    bool all = true;
    for (const auto& c : cells) {
      aadt_gradcheck_result res{};
      check(aadt_gradcheck(c.c_str(), seeds, &res));
      std::printf("%-10s %s cases=%d max_rel_error=%.3e\n", res.cell, res.passed ? "PASS" : "FAIL", res.cases,
                  res.max_relative_error);
      all = all && res.passed;
    }
    if (!all) throw Failure{AADT_ERR_NUMERIC, "gradient-check", "analytic and numeric gradients disagree"};
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::fflush(stdout);
    std::fprintf(stderr, "error code=%s message=\"%s\"\n", f.code.c_str(), quoted(f.message).c_str());
    return f.status;
  }
}
